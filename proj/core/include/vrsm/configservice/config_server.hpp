#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "vrsm/configservice/config_state.hpp"
#include "vrsm/paxos/paxos.hpp"

namespace vrsm {

struct ConfigServerOptions {
  PaxosOptions paxos;
  Nanos lease_duration = std::chrono::seconds(1);
  // A granted lease is reused while at least this much of it remains.
  Nanos lease_reuse_margin = std::chrono::milliseconds(500);
  Nanos write_poll = std::chrono::milliseconds(10);
  // Upper bound on how long try_write_config waits for the old lease.
  Nanos write_wait_limit = std::chrono::seconds(5);
};

// Initial replicated state for a fresh deployment whose epoch-1 servers are
// `servers`.
ConfigState initial_config_state(const std::vector<Address>& servers);

// Configuration service node: the Paxos acceptor plus the configuration
// operations, which only the Paxos leader executes.
class ConfigServer {
 public:
  static Task<std::unique_ptr<ConfigServer>> recover(Env& env, ConfigServerOptions opts,
                                                     std::vector<Address> initial_config);

  void register_handlers(HandlerTable& table);

  struct Reserved {
    Err err = Err::kOk;
    uint64_t epoch = 0;
    std::vector<Address> config;
  };
  Task<Reserved> reserve_epoch_and_get_config();
  std::pair<Err, std::vector<Address>> get_config() const;
  Task<Err> try_write_config(uint64_t epoch, std::vector<Address> config);
  struct Lease {
    Err err = Err::kOk;
    TimeNs expiration = 0;
  };
  Task<Lease> get_lease(uint64_t epoch);

  PaxosNode& paxos() { return *paxos_; }

 private:
  ConfigServer(Env& env, ConfigServerOptions opts, std::unique_ptr<PaxosNode> paxos);

  Task<Bytes> handle_reserve(Bytes args);
  Task<Bytes> handle_get_config(Bytes args);
  Task<Bytes> handle_write_config(Bytes args);
  Task<Bytes> handle_get_lease(Bytes args);

  Env& env_;
  ConfigServerOptions opts_;
  std::unique_ptr<PaxosNode> paxos_;
  // Serializes read-modify-write cycles on the replicated state.
  AsyncMutex op_mu_;
};

// Runs a configuration server forever: recovery, RPC service on the node's
// own address.
Task<void> run_config_server(Env& env, ConfigServerOptions opts, std::vector<Address> initial_config);

}  // namespace vrsm
