#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vrsm/common/types.hpp"
#include "vrsm/lincheck/checker.hpp"
#include "vrsm/lincheck/history.hpp"
#include "vrsm/transport/address.hpp"

namespace vrsm::real {

struct SmokeOptions {
  // When set, the workload runs against this running deployment instead of
  // a fresh loopback one, and no reconfiguration is attempted.
  std::vector<Address> external_config;
  std::filesystem::path data_dir;
  size_t config_servers = 3;
  size_t replicas = 3;
  size_t spare_replicas = 2;
  size_t clients = 8;
  size_t total_ops = 10000;
  double read_fraction = 0.95;
  size_t key_space = 50;
  // Prepended to every key. A fresh prefix keeps the checked history
  // independent of what an external deployment already stores.
  std::string key_prefix;
  // One reconfiguration starts once this many operations have completed.
  // Zero disables it.
  size_t reconfig_after_ops = 3000;
  // An operation slower than this counts as a client-visible error.
  Nanos op_timeout = std::chrono::seconds(10);
  Nanos time_limit = std::chrono::seconds(180);
  bool check = true;
  uint64_t seed = 1;
};

struct SmokeReport {
  bool passed = true;
  std::vector<std::string> failures;
  uint64_t completed_ops = 0;
  uint64_t client_errors = 0;
  bool reconfigured = false;
  // Completed operations when the reconfiguration finished.
  uint64_t ops_at_reconfig = 0;
  std::vector<std::string> final_config;
  double wall_seconds = 0;
  double mean_read_latency_us = 0;
  double mean_write_latency_us = 0;
  double p50_latency_us = 0;
  double p99_latency_us = 0;
  double ops_per_second = 0;
  History history;
  bool lincheck_ran = false;
  CheckResult lincheck;

  std::string summary() const;
};

// Runs a whole loopback deployment (TCP on 127.0.0.1, files under data_dir)
// with a KV workload and one live reconfiguration that replaces the first
// primary, then checks the history. Only the workload runs when
// external_config is set.
SmokeReport run_loopback_smoke(const SmokeOptions& opts);

}  // namespace vrsm::real
