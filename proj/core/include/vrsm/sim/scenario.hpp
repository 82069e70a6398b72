#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vrsm/common/types.hpp"
#include "vrsm/lincheck/checker.hpp"
#include "vrsm/lincheck/history.hpp"
#include "vrsm/sim/oracle.hpp"
#include "vrsm/transport/fault_profile.hpp"

namespace vrsm::sim {

enum class Workload {
  // Put/Get/CondPut from several clients.
  kKv,
  // Exactly-once increments of a replicated counter.
  kCounter,
  // Transfers and audits over two vKV instances (balances and locks).
  kBank,
  // Lease-based client cache.
  kCache,
  // Lock acquire/release from several nodes on one key.
  kLock,
  // Bare Paxos group with competing leaders.
  kPaxos,
};

std::string_view workload_name(Workload w);
// Throws std::invalid_argument for unknown names.
Workload parse_workload(std::string_view name);

struct Scenario {
  std::string name = "default";
  Workload workload = Workload::kKv;
  uint64_t seed = 1;

  size_t config_servers = 3;
  size_t replicas = 3;
  // Replica nodes only reachable through reconfiguration.
  size_t spare_replicas = 2;
  Nanos epsilon = std::chrono::milliseconds(50);

  FaultProfile faults;

  size_t clients = 5;
  size_t ops_per_client = 40;
  double read_fraction = 0.5;
  size_t key_space = 5;
  Nanos think_max = std::chrono::milliseconds(20);
  // Cache lease length requested by get_and_cache.
  Nanos cache_time = std::chrono::milliseconds(300);
  // Bank only.
  size_t accounts = 6;
  uint64_t initial_balance = 100;

  // Crash/restart events, each at a random time inside the fault window.
  size_t backup_crashes = 1;
  size_t config_crashes = 0;
  // Isolate a random server for a while.
  size_t partitions = 0;
  Nanos fault_window_start = std::chrono::milliseconds(500);
  Nanos fault_window_end = std::chrono::seconds(6);
  Nanos restart_min = std::chrono::milliseconds(100);
  Nanos restart_max = std::chrono::seconds(2);
  Nanos partition_min = std::chrono::milliseconds(300);
  Nanos partition_max = std::chrono::seconds(2);

  // Each controller performs this many successful reconfigurations, starting
  // at random times inside the reconfiguration window.
  size_t controllers = 1;
  size_t reconfigurations = 1;
  Nanos reconfig_window_start = std::chrono::milliseconds(500);
  Nanos reconfig_window_end = std::chrono::seconds(6);
  // When positive, a healer reconfigures whenever no client operation has
  // completed for this long (e.g. after the primary crashed).
  Nanos heal_after = Nanos(0);

  // Replica knobs.
  Nanos pause_after_lease_check = Nanos(0);
  double pause_probability = 1;
  bool read_waits_for_next_index = false;

  // Deliberately broken variants, for checking that the checks bite.
  bool mutant_ack_before_sync = false;
  bool mutant_backup_ack_before_durable = false;
  bool mutant_paxos_ack_before_persist = false;

  // Virtual time after which an unfinished run fails.
  Nanos time_limit = std::chrono::seconds(600);
};

// INI text with sections [scenario] [cluster] [network] [workload] [faults]
// [reconfig] [protocol] [mutants]. Durations are in milliseconds and their
// keys end in _ms. Unknown keys are errors. Throws std::invalid_argument.
Scenario parse_scenario(std::string_view ini);
Scenario load_scenario(const std::string& path);
std::string scenario_to_ini(const Scenario& sc);

struct RunOptions {
  bool check_linearizability = true;
  bool keep_event_lines = false;
  CheckOptions lincheck;
  // Crash this node when its disk performs its k-th mutation (1-based), and
  // restart it shortly after. Used by crash_point_sweep.
  std::string crash_node;
  uint64_t crash_at_mutation = 0;
};

struct RunReport {
  bool passed = true;
  std::vector<std::string> failures;

  uint64_t seed = 0;
  uint64_t event_hash = 0;
  uint64_t events = 0;
  TimeNs end_time = 0;
  std::vector<std::string> event_lines;

  History history;
  bool lincheck_ran = false;
  CheckResult lincheck;
  GlobalOracle::Stats oracle;
  uint64_t first_violation_event = 0;

  uint64_t completed_ops = 0;
  double mean_read_latency_ms = 0;
  uint64_t reconfigurations = 0;
  uint64_t heals = 0;
  uint64_t crashes = 0;
  // Workload-specific results.
  uint64_t final_counter = 0;
  std::vector<uint64_t> audits;
  uint64_t lock_acquisitions = 0;
  bool paxos_final_commit = false;
  // Disk mutations performed by RunOptions::crash_node (counted even when no
  // crash is requested).
  uint64_t crash_node_mutations = 0;

  std::string summary() const;
};

RunReport run_scenario(const Scenario& sc, const RunOptions& opts = {});

struct SweepReport {
  std::string node;
  uint64_t crash_points = 0;
  // Crash points (mutation numbers) whose run failed, with the first failure.
  std::vector<std::pair<uint64_t, std::string>> violations;
};

// Runs the scenario once to count the node's disk mutations, then once per
// mutation with the node crashing while that mutation is in flight. At most
// `max_points` crash points are tried, evenly spread.
SweepReport crash_point_sweep(const Scenario& sc, const std::string& node, uint64_t max_points = 0);

}  // namespace vrsm::sim
