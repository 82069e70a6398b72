#pragma once

#include <vector>

#include "vrsm/common/error.hpp"
#include "vrsm/configservice/config_clerk.hpp"
#include "vrsm/replica/replica_server.hpp"

namespace vrsm {

struct ReconfigOptions {
  Nanos reserve_deadline = std::chrono::seconds(5);
  Nanos seal_timeout = std::chrono::seconds(1);
  Nanos set_state_timeout = std::chrono::seconds(2);
  Nanos write_config_deadline = std::chrono::seconds(10);
  Nanos become_primary_deadline = std::chrono::seconds(3);
};

// Moves the replicated state machine to `new_servers` under a freshly
// reserved epoch: seal one old server, install its state on every new server,
// make the configuration live, then promote new_servers[0]. Any failure
// abandons the attempt; callers retry with a new epoch.
Task<Err> reconfigure(Env& env, ConfigClerk& config, std::vector<Address> new_servers,
                      ReconfigOptions opts = {});

// Brings fresh replicas into epoch 1 with empty state and promotes the first.
// Retries until done or the deadline passes.
Task<Err> initialize_replicas(Env& env, std::vector<Address> servers, Nanos deadline);

}  // namespace vrsm
