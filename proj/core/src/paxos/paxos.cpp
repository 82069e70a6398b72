#include "vrsm/paxos/paxos.hpp"

#include <tuple>

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_paxos_durable(const PaxosDurable& s) {
  Encoder e;
  e.u64(s.promised).u64(s.accepted_epoch).u64(s.accepted_index).bytes(s.blob);
  return e.take();
}

std::optional<PaxosDurable> decode_paxos_durable(BytesView b) {
  Decoder d(b);
  PaxosDurable s;
  s.promised = d.u64();
  s.accepted_epoch = d.u64();
  s.accepted_index = d.u64();
  s.blob = d.bytes();
  if (!d.done()) return std::nullopt;
  return s;
}

uint64_t next_owned_epoch(uint64_t floor, uint64_t id, uint64_t n) {
  uint64_t e = (floor / n) * n + id;
  if (e <= floor) e += n;
  return e;
}

namespace {

struct Round {
  explicit Round(Env& env) : cv(env) {}
  size_t acks = 1;  // the local acceptor
  size_t replies = 0;
  uint64_t highest_promise = 0;
  uint64_t best_epoch = 0;
  uint64_t best_index = 0;
  Bytes best_blob;
  Notifier cv;
};

Task<void> send_prepare(std::shared_ptr<Round> round, RpcClient client, uint64_t epoch, Nanos timeout) {
  Encoder e;
  e.u64(epoch);
  auto reply = co_await client.call(paxos_rpc::kPrepare, e.take(), timeout);
  round->replies++;
  if (reply) {
    Decoder d(*reply);
    bool ok = d.u8() != 0;
    uint64_t promised = d.u64();
    if (ok) {
      uint64_t acc_epoch = d.u64();
      uint64_t acc_index = d.u64();
      Bytes blob = d.bytes();
      if (d.done()) {
        round->acks++;
        if (std::tie(acc_epoch, acc_index) > std::tie(round->best_epoch, round->best_index)) {
          round->best_epoch = acc_epoch;
          round->best_index = acc_index;
          round->best_blob = std::move(blob);
        }
      }
    } else if (d.ok()) {
      round->highest_promise = std::max(round->highest_promise, promised);
    }
  }
  round->cv.notify_all();
}

Task<void> send_propose(std::shared_ptr<Round> round, RpcClient client, Bytes args, Nanos timeout) {
  auto reply = co_await client.call(paxos_rpc::kPropose, std::move(args), timeout);
  round->replies++;
  if (reply) {
    Decoder d(*reply);
    bool ok = d.u8() != 0;
    uint64_t promised = d.u64();
    if (d.done()) {
      if (ok) {
        round->acks++;
      } else {
        round->highest_promise = std::max(round->highest_promise, promised);
      }
    }
  }
  round->cv.notify_all();
}

}  // namespace

PaxosNode::PaxosNode(Env& env, PaxosOptions opts) : env_(env), opts_(std::move(opts)), mu_(env) {
  for (uint64_t i = 0; i < opts_.peers.size(); i++) {
    if (i == opts_.id) {
      peers_.emplace_back();
    } else {
      peers_.emplace_back(RpcClient(env, opts_.peers[i]));
    }
  }
}

Task<std::unique_ptr<PaxosNode>> PaxosNode::recover(Env& env, PaxosOptions opts, Bytes initial_blob) {
  std::unique_ptr<PaxosNode> node(new PaxosNode(env, std::move(opts)));
  auto data = co_await env.store().read(node->opts_.file);
  std::optional<PaxosDurable> st;
  if (data) st = decode_paxos_durable(*data);
  if (st) {
    node->st_ = std::move(*st);
  } else {
    node->st_.blob = std::move(initial_blob);
    co_await node->persist();
  }
  const auto& s = node->st_;
  env.observer().paxos_recovered(node->opts_.group, s.promised, s.accepted_epoch, s.accepted_index);
  co_return node;
}

Task<void> PaxosNode::persist() { co_await env_.store().write_atomic(opts_.file, encode_paxos_durable(st_)); }

void PaxosNode::register_handlers(HandlerTable& table) {
  table[paxos_rpc::kPrepare] = [this](Bytes a) { return handle_prepare(std::move(a)); };
  table[paxos_rpc::kPropose] = [this](Bytes a) { return handle_propose(std::move(a)); };
  table[paxos_rpc::kTryBecomeLeader] = [this](Bytes a) { return handle_try_become_leader(std::move(a)); };
}

Task<Bytes> PaxosNode::handle_prepare(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  if (!d.done()) co_return Bytes();
  auto guard = co_await mu_.lock();
  Encoder out;
  if (epoch < st_.promised) {
    out.u8(0).u64(st_.promised);
    co_return out.take();
  }
  if (epoch > st_.promised) {
    st_.promised = epoch;
    if (leader_ && epoch > leader_epoch_) leader_ = false;
    if (opts_.ack_before_persist) {
      env_.spawn(persist());
    } else {
      co_await persist();
    }
  }
  env_.observer().paxos_acked(opts_.group, true, epoch, 0);
  out.u8(1).u64(st_.promised).u64(st_.accepted_epoch).u64(st_.accepted_index).bytes(st_.blob);
  co_return out.take();
}

Task<Bytes> PaxosNode::handle_propose(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  uint64_t index = d.u64();
  Bytes blob = d.bytes();
  if (!d.done()) co_return Bytes();
  auto guard = co_await mu_.lock();
  Encoder out;
  bool fresh = epoch > st_.accepted_epoch || index > st_.accepted_index;
  bool duplicate = epoch == st_.accepted_epoch && index == st_.accepted_index;
  if (epoch < st_.promised || !(fresh || duplicate)) {
    out.u8(0).u64(st_.promised);
    co_return out.take();
  }
  if (fresh) {
    st_.promised = epoch;
    st_.accepted_epoch = epoch;
    st_.accepted_index = index;
    st_.blob = std::move(blob);
    if (leader_ && epoch > leader_epoch_) leader_ = false;
    if (opts_.ack_before_persist) {
      env_.spawn(persist());
    } else {
      co_await persist();
    }
    env_.observer().paxos_accepted(opts_.group, epoch, index, st_.blob);
  }
  env_.observer().paxos_acked(opts_.group, false, epoch, index);
  out.u8(1).u64(st_.promised);
  co_return out.take();
}

Task<Bytes> PaxosNode::handle_try_become_leader(Bytes) {
  bool ok = leader_;
  if (!ok) ok = co_await try_become_leader();
  Encoder out;
  out.u8(ok ? 1 : 0);
  co_return out.take();
}

Task<bool> PaxosNode::try_become_leader() {
  uint64_t epoch = 0;
  auto round = std::make_shared<Round>(env_);
  {
    auto guard = co_await mu_.lock();
    epoch = next_owned_epoch(std::max(st_.promised, leader_epoch_), opts_.id, opts_.peers.size());
    st_.promised = epoch;
    leader_ = false;
    co_await persist();
    round->best_epoch = st_.accepted_epoch;
    round->best_index = st_.accepted_index;
    round->best_blob = st_.blob;
  }
  size_t others = 0;
  for (auto& p : peers_) {
    if (!p) continue;
    others++;
    env_.spawn(send_prepare(round, *p, epoch, opts_.rpc_timeout));
  }
  while (round->acks < majority() && round->replies < others) co_await round->cv.wait();
  if (round->acks < majority()) co_return false;

  auto guard = co_await mu_.lock();
  if (st_.promised != epoch) co_return false;
  // Adopting keeps the original label. It is not a vote in that epoch (we have
  // already promised a later one), so the observer is not told.
  if (std::tie(round->best_epoch, round->best_index) > std::tie(st_.accepted_epoch, st_.accepted_index)) {
    st_.accepted_epoch = round->best_epoch;
    st_.accepted_index = round->best_index;
    st_.blob = round->best_blob;
    co_await persist();
  }
  leader_ = true;
  leader_epoch_ = epoch;
  co_return true;
}

Task<Err> PaxosNode::commit(Handle handle, Bytes new_state) {
  Bytes args;
  {
    auto guard = co_await mu_.lock();
    if (!leader_ || leader_epoch_ != handle.epoch || st_.promised != handle.epoch) co_return Err::kNotLeader;
    if (st_.accepted_index != handle.index) co_return Err::kRetry;
    st_.accepted_epoch = handle.epoch;
    st_.accepted_index = handle.index + 1;
    st_.blob = std::move(new_state);
    co_await persist();
    env_.observer().paxos_accepted(opts_.group, st_.accepted_epoch, st_.accepted_index, st_.blob);
    Encoder e;
    e.u64(st_.accepted_epoch).u64(st_.accepted_index).bytes(st_.blob);
    args = e.take();
  }
  uint64_t epoch = handle.epoch;
  uint64_t index = handle.index + 1;
  auto round = std::make_shared<Round>(env_);
  size_t others = 0;
  for (auto& p : peers_) {
    if (!p) continue;
    others++;
    env_.spawn(send_propose(round, *p, args, opts_.rpc_timeout));
  }
  while (round->acks < majority() && round->replies < others) co_await round->cv.wait();
  if (round->highest_promise > epoch && leader_epoch_ == epoch) leader_ = false;
  if (round->acks < majority()) co_return Err::kNotLeader;
  if (leader_ && leader_epoch_ == epoch) {
    committed_epoch_ = epoch;
    committed_index_ = std::max(committed_index_, index);
  }
  co_return Err::kOk;
}

}  // namespace vrsm
