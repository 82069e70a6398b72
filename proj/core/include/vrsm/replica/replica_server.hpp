#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "vrsm/common/error.hpp"
#include "vrsm/configservice/config_clerk.hpp"
#include "vrsm/kv/vsm.hpp"
#include "vrsm/rpc/rpc.hpp"
#include "vrsm/runtime/sync.hpp"
#include "vrsm/storage/state_logger.hpp"

namespace vrsm {

namespace replica_rpc {
constexpr uint64_t kApply = 30;
constexpr uint64_t kApplyAsBackup = 31;
constexpr uint64_t kApplyReadonly = 32;
constexpr uint64_t kGetStateAndSeal = 33;
constexpr uint64_t kSetNewEpochState = 34;
constexpr uint64_t kBecomePrimary = 35;
constexpr uint64_t kIncreaseCommitIndex = 36;
}  // namespace replica_rpc

// State handed from the old configuration to the new one. Also stored as the
// snapshot field of the replica's log header.
struct EpochState {
  uint64_t next_index = 0;
  Bytes snapshot;

  bool operator==(const EpochState&) const = default;
};

// [nextIndex u64][snapLen u64][snap]
Bytes encode_epoch_state(const EpochState& s);
std::optional<EpochState> decode_epoch_state(BytesView b);

struct ReplicaOptions {
  Address self;
  std::vector<Address> config_servers;
  uint32_t service = 0;
  std::string log_file = "replica.log";
  StorageOptions storage;

  Nanos lease_renew_interval = std::chrono::milliseconds(250);
  Nanos lease_request_deadline = std::chrono::seconds(1);
  Nanos commit_broadcast_interval = std::chrono::milliseconds(20);
  // Unchanged commit indexes are re-sent every this many broadcast ticks.
  int commit_resend_ticks = 10;
  Nanos wait_committed_timeout = std::chrono::seconds(2);
  Nanos backup_rpc_timeout = std::chrono::seconds(1);
  Nanos backup_retry_delay = std::chrono::milliseconds(5);
  // How long a backup holds an operation that arrived ahead of its turn.
  Nanos out_of_order_wait = std::chrono::milliseconds(50);

  // Reads wait for the whole log instead of the prefix they depend on.
  bool read_waits_for_next_index = false;
  // Fault injection: stall between the lease check and the read.
  Nanos pause_after_lease_check = Nanos(0);
  // Fraction of reads that pause.
  double pause_probability = 1;
  // Test-only mutation: backups acknowledge before the record is durable.
  bool backup_ack_before_durable = false;

  ConfigClerkOptions config_clerk;
};

// One server of a primary/backup replicated state machine.
class ReplicaServer {
 public:
  static Task<std::unique_ptr<ReplicaServer>> recover(Env& env, ReplicaOptions opts, VsmFactory factory);

  void register_handlers(HandlerTable& table);
  // Starts lease renewal and commit-index broadcasting.
  void start_background();

  struct Reply {
    Err err = Err::kOk;
    Bytes payload;
  };
  Task<Reply> apply(Bytes op);
  Task<Err> apply_as_backup(uint64_t epoch, uint64_t index, Bytes op);
  Task<Reply> apply_readonly(Bytes op);

  struct SealReply {
    Err err = Err::kOk;
    EpochState state;
  };
  Task<SealReply> get_state_and_seal(uint64_t new_epoch);
  struct EpochReply {
    Err err = Err::kOk;
    // The server's epoch after the call.
    uint64_t epoch = 0;
  };
  Task<EpochReply> set_new_epoch_state(uint64_t new_epoch, EpochState state);
  Task<Err> become_primary(uint64_t epoch, std::vector<Address> config);
  Err increase_commit_index(uint64_t epoch, uint64_t committed_next);

  uint64_t epoch() const { return epoch_; }
  uint64_t next_index() const { return next_index_; }
  uint64_t committed_next() const { return committed_; }
  bool is_primary() const { return primary_; }
  bool is_sealed() const { return sealed_; }
  TimeNs lease_expiration() const { return lease_expiration_; }
  VersionedStateMachine& state_machine() { return *vsm_; }

 private:
  ReplicaServer(Env& env, ReplicaOptions opts, VsmFactory factory);

  struct Fanout;
  Task<void> send_to_backup(std::shared_ptr<Fanout> f, RpcClient client, uint64_t epoch, Bytes args);
  Task<bool> wait_for_committed(uint64_t epoch, uint64_t index);
  void advance_committed(uint64_t committed_next);
  Task<void> lease_loop();
  Task<void> broadcast_loop();

  Task<Bytes> handle_apply(Bytes args);
  Task<Bytes> handle_apply_as_backup(Bytes args);
  Task<Bytes> handle_apply_readonly(Bytes args);
  Task<Bytes> handle_seal(Bytes args);
  Task<Bytes> handle_set_state(Bytes args);
  Task<Bytes> handle_become_primary(Bytes args);
  Task<Bytes> handle_increase_commit(Bytes args);

  Env& env_;
  ReplicaOptions opts_;
  VsmFactory factory_;
  std::unique_ptr<VersionedStateMachine> vsm_;
  std::unique_ptr<StateLogger> logger_;
  ConfigClerk config_;

  uint64_t epoch_ = 0;
  // Log index of the first operation recorded in the current epoch's file.
  uint64_t epoch_start_ = 0;
  uint64_t next_index_ = 0;
  uint64_t committed_ = 0;
  bool sealed_ = false;
  bool primary_ = false;
  // Set on entering an epoch; a restarted server may not become primary.
  bool can_become_primary_ = false;
  TimeNs lease_expiration_ = 0;
  std::vector<RpcClient> backups_;

  AsyncMutex mu_;
  Notifier state_cv_;
  Notifier commit_cv_;
};

Task<void> run_replica_server(Env& env, ReplicaOptions opts, VsmFactory factory);

}  // namespace vrsm
