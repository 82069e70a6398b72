#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "vrsm/common/error.hpp"
#include "vrsm/configservice/config_state.hpp"
#include "vrsm/rpc/rpc.hpp"

namespace vrsm {

struct ConfigClerkOptions {
  Nanos rpc_timeout = std::chrono::milliseconds(800);
  // try_write_config may block server-side until the old lease expires.
  Nanos write_rpc_timeout = std::chrono::seconds(4);
  Nanos nudge_timeout = std::chrono::seconds(2);
  Nanos backoff = std::chrono::milliseconds(20);
  // Reservation is not idempotent and every retransmitted copy reserves
  // another epoch, so retransmit later than a paxos commit usually takes.
  RpcOptions rpc{std::chrono::seconds(1), std::chrono::seconds(2)};
};

// Client of the configuration service. Requests go to the last known leader;
// after a full round of failures the clerk asks servers, in index order, to
// become leader.
class ConfigClerk {
 public:
  ConfigClerk(Env& env, std::vector<Address> servers, ConfigClerkOptions opts = {});

  struct Reserved {
    uint64_t epoch = 0;
    std::vector<Address> config;
  };
  Task<std::optional<Reserved>> reserve_epoch_and_get_config(Nanos deadline);
  Task<std::optional<std::vector<Address>>> get_config(Nanos deadline);
  Task<Err> try_write_config(uint64_t epoch, std::vector<Address> config, Nanos deadline);
  struct Lease {
    Err err = Err::kOk;
    TimeNs expiration = 0;
  };
  Task<Lease> get_lease(uint64_t epoch, Nanos deadline);

 private:
  // Sends `args` to the leader, following leadership changes until the
  // deadline. Returns the reply's error code and the bytes after it.
  Task<std::pair<Err, Bytes>> leader_call(uint64_t rpc_id, Bytes args, Nanos call_timeout, Nanos deadline);
  Task<void> nudge(TimeNs deadline);

  Env& env_;
  ConfigClerkOptions opts_;
  std::vector<RpcClient> servers_;
  size_t leader_ = 0;
};

}  // namespace vrsm
