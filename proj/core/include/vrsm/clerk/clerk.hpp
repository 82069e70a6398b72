#pragma once

#include <map>
#include <vector>

#include "vrsm/configservice/config_clerk.hpp"
#include "vrsm/rpc/rpc.hpp"

namespace vrsm {

struct ClerkOptions {
  Nanos apply_timeout = std::chrono::seconds(3);
  // Must exceed the replicas' commit wait so reads are not cut short.
  Nanos read_timeout = std::chrono::seconds(3);
  Nanos config_deadline = std::chrono::seconds(3);
  Nanos backoff_min = std::chrono::milliseconds(50);
  Nanos backoff_max = std::chrono::milliseconds(500);
  ConfigClerkOptions config;
};

// Client of a replicated state machine. Operations are retried until they
// succeed; writes go to the primary and reads to any server in the cached
// configuration, which is refreshed from the configuration service on errors.
// One operation at a time.
class Clerk {
 public:
  Clerk(Env& env, std::vector<Address> config_servers, ClerkOptions opts = {});

  Task<Bytes> apply(Bytes op);
  Task<Bytes> read(Bytes op);

  const std::vector<Address>& cached_config() const { return config_; }
  uint64_t retries() const { return retries_; }

 private:
  Task<void> refresh();
  Task<void> backoff(Nanos& delay);
  RpcClient& client(const Address& a);

  Env& env_;
  ClerkOptions opts_;
  ConfigClerk config_clerk_;
  std::vector<Address> config_;
  std::map<Address, RpcClient> clients_;
  uint64_t retries_ = 0;
};

}  // namespace vrsm
