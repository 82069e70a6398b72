#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrsm/common/error.hpp"
#include "vrsm/common/types.hpp"
#include "vrsm/rpc/rpc.hpp"
#include "vrsm/runtime/env.hpp"
#include "vrsm/runtime/sync.hpp"

namespace vrsm {

namespace paxos_rpc {
constexpr uint64_t kPrepare = 10;
constexpr uint64_t kPropose = 11;
constexpr uint64_t kTryBecomeLeader = 12;
}  // namespace paxos_rpc

struct PaxosOptions {
  // Index of this server in `peers`.
  uint64_t id = 0;
  std::vector<Address> peers;
  uint32_t group = 0;
  std::string file = "paxos.state";
  Nanos rpc_timeout = std::chrono::milliseconds(800);
  // Test-only mutation: acknowledge prepare/propose before persisting.
  bool ack_before_persist = false;
};

// Acceptor state persisted before every acknowledgement.
struct PaxosDurable {
  uint64_t promised = 0;
  uint64_t accepted_epoch = 0;
  uint64_t accepted_index = 0;
  Bytes blob;

  bool operator==(const PaxosDurable&) const = default;
};

Bytes encode_paxos_durable(const PaxosDurable& s);
std::optional<PaxosDurable> decode_paxos_durable(BytesView b);

// Smallest epoch above `floor` owned by server `id` of `n`.
uint64_t next_owned_epoch(uint64_t floor, uint64_t id, uint64_t n);

// Single-decree-per-index Paxos over a whole-state blob. The leader of epoch e
// proposes (e, i+1, state) after locally accepting it; acceptors accept any
// proposal with a higher (epoch, index) pair at an epoch they have promised.
class PaxosNode {
 public:
  static Task<std::unique_ptr<PaxosNode>> recover(Env& env, PaxosOptions opts, Bytes initial_blob);

  void register_handlers(HandlerTable& table);

  // Locally accepted state; may be stale or uncommitted.
  const Bytes& weak_read() const { return st_.blob; }

  struct Handle {
    Bytes state;
    uint64_t epoch = 0;
    uint64_t index = 0;
  };
  // Current state and a handle for replacing it.
  Handle begin() const { return Handle{st_.blob, leader_epoch_, st_.accepted_index}; }
  // Commits `new_state` as the successor of the handle's state. Fails with
  // kNotLeader if leadership was lost and kRetry if another commit intervened.
  Task<Err> commit(Handle handle, Bytes new_state);

  // Runs a prepare round for a fresh epoch owned by this server.
  Task<bool> try_become_leader();

  bool is_leader() const { return leader_; }
  uint64_t leader_epoch() const { return leader_epoch_; }
  // True if the local state is known to be committed by this leader.
  bool state_committed() const {
    return leader_ && committed_epoch_ == leader_epoch_ && committed_index_ == st_.accepted_index;
  }
  const PaxosDurable& durable() const { return st_; }
  const PaxosOptions& options() const { return opts_; }

 private:
  PaxosNode(Env& env, PaxosOptions opts);

  Task<void> persist();
  Task<Bytes> handle_prepare(Bytes args);
  Task<Bytes> handle_propose(Bytes args);
  Task<Bytes> handle_try_become_leader(Bytes args);
  size_t majority() const { return opts_.peers.size() / 2 + 1; }

  Env& env_;
  PaxosOptions opts_;
  PaxosDurable st_;
  bool leader_ = false;
  uint64_t leader_epoch_ = 0;
  uint64_t committed_epoch_ = 0;
  uint64_t committed_index_ = 0;
  AsyncMutex mu_;
  std::vector<std::optional<RpcClient>> peers_;
};

}  // namespace vrsm
