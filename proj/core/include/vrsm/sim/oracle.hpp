#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "vrsm/configservice/config_state.hpp"
#include "vrsm/kv/vsm.hpp"
#include "vrsm/sim/simulator.hpp"

namespace vrsm::sim {

// Safety monitors fed by every node's observer hooks. Holds ghost state that
// protocol code never reads: per-epoch operation logs, the committed log,
// chosen Paxos values, the live-epoch timeline and what each node
// acknowledged before it crashed.
class GlobalOracle {
 public:
  explicit GlobalOracle(Simulator& sim);
  ~GlobalOracle();

  // Installs the oracle as the observer of every simulator node.
  void attach();

  // A replicated service and the Paxos group that configures it.
  void add_service(uint32_t service, size_t paxos_servers, const std::vector<Address>& initial_config);
  // A Paxos group whose values are opaque (no configuration checks).
  void add_paxos_group(uint32_t group, size_t servers);
  // Replays committed operations into `shadow` (for app-level monitors).
  void set_shadow(uint32_t service, VsmFactory factory);
  // Values of this service are cache entries: no committed write may change
  // a key's value while its stored lease is unexpired.
  void watch_cache(uint32_t service);
  // Values of this service are locks: a held lock must be released before
  // anyone else takes it.
  void watch_locks(uint32_t service);

  bool ok() const { return violations_.empty(); }
  const std::vector<std::string>& violations() const { return violations_; }
  // Event index of the first violation (0 if none).
  uint64_t first_violation_event() const { return first_violation_event_; }

  struct Stats {
    uint64_t committed_ops = 0;
    uint64_t chosen_values = 0;
    uint64_t live_transitions = 0;
    uint64_t lease_reads = 0;
    // Lease reads whose epoch was no longer live by the time the read ran.
    uint64_t reads_outliving_epoch = 0;
    uint64_t lock_acquisitions = 0;
    uint64_t cache_value_changes = 0;
    uint64_t recoveries_checked = 0;
  };
  const Stats& stats() const { return stats_; }
  const std::vector<Bytes>& committed_log(uint32_t service) const;
  // Live epoch in the Paxos group of `service`, as of the latest chosen value.
  uint64_t live_epoch(uint32_t service) const;
  std::vector<Address> live_config(uint32_t service) const;
  // Distinct indexes with a chosen value in `group`.
  size_t chosen_count(uint32_t group) const;

 private:
  class NodeObserver;
  friend class NodeObserver;

  struct LogEntry {
    Bytes op;
    TimeNs applied_at = 0;
  };
  struct Service {
    size_t majority = 0;
    bool config_values = true;
    // Ops of each epoch, including the prefix inherited from the sealed state.
    std::map<uint64_t, std::vector<LogEntry>> logs;
    // (new epoch, next index) -> epoch the sealed state came from.
    std::map<std::pair<uint64_t, uint64_t>, uint64_t> seals;
    std::map<uint64_t, uint64_t> epoch_start;
    std::vector<Bytes> committed;
    std::vector<TimeNs> committed_applied_at;

    // Paxos group.
    std::map<std::tuple<uint64_t, uint64_t>, std::set<NodeId>> accepts;
    std::map<std::tuple<uint64_t, uint64_t>, Bytes> proposals;
    std::map<uint64_t, Bytes> chosen;
    uint64_t highest_chosen = 0;
    uint64_t live = 1;
    std::map<uint64_t, TimeNs> lease_max;
    std::map<uint64_t, std::vector<Address>> live_configs;
    std::set<uint64_t> live_epochs;

    VsmFactory shadow_factory;
    std::unique_ptr<VersionedStateMachine> shadow;
    bool cache = false;
    bool locks = false;
  };
  // What one node acknowledged; checked when it recovers.
  struct NodeAcks {
    std::map<std::string, std::pair<uint64_t, uint64_t>> log_acked;  // file -> (epoch, count)
    std::map<std::string, std::vector<Bytes>> log_appended;          // file -> records of the header epoch
    std::map<std::string, uint64_t> log_epoch;
    std::map<uint32_t, std::pair<uint64_t, uint64_t>> backup_acked;  // service -> (epoch, index + 1)
    std::map<uint32_t, std::pair<uint64_t, uint64_t>> sealed;        // service -> (epoch, sealed flag)
    std::map<uint32_t, uint64_t> paxos_promised;
    std::map<uint32_t, std::pair<uint64_t, uint64_t>> paxos_accepted;
  };

  void violation(std::string msg);
  Service* service(uint32_t id);

  void on_primary_applied(NodeId n, uint32_t s, uint64_t epoch, uint64_t index, BytesView op);
  void on_backup_accepted(NodeId n, uint32_t s, uint64_t epoch, uint64_t index, BytesView op);
  void on_backup_acked(NodeId n, uint32_t s, uint64_t epoch, uint64_t index);
  void on_committed(NodeId n, uint32_t s, uint64_t epoch, uint64_t committed_next);
  void on_sealed(NodeId n, uint32_t s, uint64_t epoch, uint64_t new_epoch, uint64_t next_index);
  void on_entered_epoch(NodeId n, uint32_t s, uint64_t epoch, uint64_t next_index);
  void on_replica_recovered(NodeId n, uint32_t s, uint64_t epoch, uint64_t next_index, bool sealed);
  void on_lease_read(NodeId n, uint32_t s, uint64_t epoch);
  void on_lease_read_done(NodeId n, uint32_t s, uint64_t epoch);
  void on_paxos_accepted(NodeId n, uint32_t g, uint64_t epoch, uint64_t index, BytesView blob);
  void on_paxos_acked(NodeId n, uint32_t g, bool promise, uint64_t epoch, uint64_t index);
  void on_paxos_recovered(NodeId n, uint32_t g, uint64_t promised, uint64_t acc_epoch, uint64_t acc_index);
  void on_log_appended(NodeId n, std::string_view file, uint64_t epoch, uint64_t index, BytesView record);
  void on_log_acked(NodeId n, std::string_view file, uint64_t epoch, uint64_t count);
  void on_log_installed(NodeId n, std::string_view file, uint64_t epoch);
  void on_log_recovered(NodeId n, std::string_view file, uint64_t epoch, const std::vector<Bytes>& records);

  void chosen(Service& svc, uint32_t g, uint64_t index, const Bytes& blob);
  void extend_committed(Service& svc, uint32_t s, uint64_t epoch, uint64_t committed_next);
  void replay(Service& svc, uint32_t s, size_t index);

  Simulator& sim_;
  std::map<uint32_t, Service> services_;
  std::map<NodeId, NodeAcks> acks_;
  std::vector<std::string> violations_;
  uint64_t first_violation_event_ = 0;
  Stats stats_;
};

}  // namespace vrsm::sim
