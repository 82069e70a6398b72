#include "vrsm/lincheck/model.hpp"

namespace vrsm {
namespace {

const std::string& arg(const Operation& op, size_t i) {
  static const std::string empty;
  return i < op.args.size() ? op.args[i] : empty;
}

// Partitioned by key, so the state is just the value of one key.
class KvModel : public Model {
 public:
  std::string name() const override { return "kv"; }
  std::string init() const override { return ""; }
  std::optional<std::string> partition(const Operation& op) const override { return arg(op, 0); }

  std::pair<bool, std::string> step(const std::string& state, const Operation& op) const override {
    if (op.op == "put") return {!op.completed || op.result.empty(), arg(op, 1)};
    if (op.op == "get" || op.op == "get_and_cache") return {!op.completed || op.result == state, state};
    if (op.op == "cond_put") {
      bool match = state == arg(op, 1);
      bool ok = !op.completed || op.result == (match ? "ok" : "");
      return {ok, match ? arg(op, 2) : state};
    }
    return {false, state};
  }
};

class CacheModel : public KvModel {
 public:
  std::string name() const override { return "cache"; }
};

class CounterModel : public Model {
 public:
  std::string name() const override { return "counter"; }
  std::string init() const override { return "0"; }

  std::pair<bool, std::string> step(const std::string& state, const Operation& op) const override {
    if (op.op == "inc") {
      std::string next = std::to_string(std::stoull(state) + 1);
      return {!op.completed || op.result == next, next};
    }
    if (op.op == "get") return {!op.completed || op.result == state, state};
    return {false, state};
  }
};

}  // namespace

std::unique_ptr<Model> kv_model() { return std::make_unique<KvModel>(); }
std::unique_ptr<Model> counter_model() { return std::make_unique<CounterModel>(); }
std::unique_ptr<Model> cache_model() { return std::make_unique<CacheModel>(); }

std::unique_ptr<Model> model_by_name(const std::string& name) {
  if (name == "kv") return kv_model();
  if (name == "counter") return counter_model();
  if (name == "cache") return cache_model();
  return nullptr;
}

}  // namespace vrsm
