#include "vrsm/lincheck/checker.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <map>
#include <unordered_set>
#include <vector>

namespace vrsm {
namespace {

constexpr TimeNs kNever = std::numeric_limits<TimeNs>::max();

TimeNs return_time(const Operation& o) { return o.completed ? o.ret : kNever; }

struct MemoKey {
  std::vector<uint64_t> bits;
  std::string state;
  bool operator==(const MemoKey&) const = default;
};

struct MemoHash {
  size_t operator()(const MemoKey& k) const {
    size_t h = std::hash<std::string>()(k.state);
    for (uint64_t w : k.bits) h = h * 1099511628211ull ^ std::hash<uint64_t>()(w);
    return h;
  }
};

// Doubly linked list of call/return entries, as in porcupine.
struct Node {
  int op = -1;
  bool is_call = false;
  Node* match = nullptr;  // call -> its return
  Node* prev = nullptr;
  Node* next = nullptr;
};

void lift(Node* call) {
  call->prev->next = call->next;
  if (call->next) call->next->prev = call->prev;
  Node* ret = call->match;
  ret->prev->next = ret->next;
  if (ret->next) ret->next->prev = ret->prev;
}

void unlift(Node* call) {
  Node* ret = call->match;
  ret->prev->next = ret;
  if (ret->next) ret->next->prev = ret;
  call->prev->next = call;
  if (call->next) call->next->prev = call;
}

// Returns true if linearizable. steps is incremented per search step.
bool search(const History& ops, const Model& model, uint64_t max_steps, uint64_t& steps) {
  const size_t n = ops.size();
  if (n == 0) return true;

  struct Entry {
    TimeNs time;
    bool is_call;
    int op;
  };
  std::vector<Entry> entries;
  entries.reserve(2 * n);
  for (size_t i = 0; i < n; i++) {
    entries.push_back({ops[i].invoke, true, static_cast<int>(i)});
    entries.push_back({return_time(ops[i]), false, static_cast<int>(i)});
  }
  // At equal timestamps calls come first, so touching intervals overlap.
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.is_call != b.is_call) return a.is_call;
    return a.op < b.op;
  });

  std::vector<Node> nodes(2 * n + 1);
  Node* head = &nodes[0];
  std::vector<Node*> call_of(n), ret_of(n);
  Node* prev = head;
  for (size_t i = 0; i < entries.size(); i++) {
    Node* nd = &nodes[i + 1];
    nd->op = entries[i].op;
    nd->is_call = entries[i].is_call;
    nd->prev = prev;
    prev->next = nd;
    prev = nd;
    (nd->is_call ? call_of : ret_of)[nd->op] = nd;
  }
  for (size_t i = 0; i < n; i++) call_of[i]->match = ret_of[i];

  std::vector<uint64_t> linearized((n + 63) / 64, 0);
  std::unordered_set<MemoKey, MemoHash> memo;
  struct Frame {
    Node* call;
    std::string state;
  };
  std::vector<Frame> stack;
  std::string state = model.init();
  Node* entry = head->next;

  while (head->next != nullptr) {
    if (++steps > max_steps) throw ResourceLimitError(fmt::format("search exceeded {} steps", max_steps));
    if (entry->is_call) {
      const int op = entry->op;
      auto [ok, next] = model.step(state, ops[op]);
      if (ok) {
        linearized[op / 64] |= uint64_t{1} << (op % 64);
        MemoKey key{linearized, next};
        if (memo.insert(std::move(key)).second) {
          stack.push_back({entry, std::move(state)});
          state = std::move(next);
          lift(entry);
          entry = head->next;
          continue;
        }
        linearized[op / 64] &= ~(uint64_t{1} << (op % 64));
      }
      entry = entry->next;
    } else {
      // A return whose call is not linearized yet: backtrack.
      if (stack.empty()) return false;
      Frame f = std::move(stack.back());
      stack.pop_back();
      const int op = f.call->op;
      linearized[op / 64] &= ~(uint64_t{1} << (op % 64));
      state = std::move(f.state);
      unlift(f.call);
      entry = f.call->next;
    }
  }
  return true;
}

// Operations invoked at or before the k-th invocation (by invoke order), with
// anything still running at that instant marked incomplete. k == ops.size()
// means the whole history.
History prefix_at(const History& sorted, size_t k) {
  if (k >= sorted.size()) return sorted;
  TimeNs cut = sorted[k].invoke;
  History out;
  for (const auto& o : sorted) {
    if (o.invoke >= cut) break;
    Operation c = o;
    if (c.completed && c.ret >= cut) {
      c.completed = false;
      c.result.clear();
      c.ret = 0;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::map<std::string, History> split(const History& h, const Model& model) {
  std::map<std::string, History> parts;
  for (const auto& o : h) parts[model.partition(o).value_or("")].push_back(o);
  return parts;
}

}  // namespace

std::string CheckResult::describe() const {
  if (ok) return fmt::format("linearizable ({} steps)", steps);
  std::string s = fmt::format("not linearizable: partition '{}', failing prefix of {} ops\n", partition, prefix.size());
  s += history_to_jsonl(prefix);
  return s;
}

CheckResult check_linearizable(const History& h, const Model& model, const CheckOptions& opts) {
  CheckResult result;
  for (auto& [key, part] : split(h, model)) {
    std::stable_sort(part.begin(), part.end(),
                     [](const Operation& a, const Operation& b) { return a.invoke < b.invoke; });
    uint64_t steps = 0;
    bool ok = search(part, model, opts.max_steps, steps);
    result.steps += steps;
    if (ok) continue;

    result.ok = false;
    result.partition = key;
    size_t lo = 0, hi = part.size();  // prefix_at(hi) fails; prefix_at(0) is empty and passes
    if (opts.minimize) {
      while (hi - lo > 1) {
        size_t mid = lo + (hi - lo) / 2;
        uint64_t s = 0;
        if (search(prefix_at(part, mid), model, opts.max_steps, s)) lo = mid; else hi = mid;
        result.steps += s;
      }
    }
    result.prefix = prefix_at(part, hi);
    return result;
  }
  return result;
}

}  // namespace vrsm
