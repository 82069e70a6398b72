#pragma once

#include "vrsm/exactlyonce/exactlyonce.hpp"
#include "vrsm/kv/kv_machine.hpp"

namespace vrsm {

// Linearizable key-value client over an exactly-once replicated KvMachine.
class KvClerk {
 public:
  KvClerk(Env& env, std::vector<Address> config_servers, ClerkOptions opts = {})
      : eo_(env, std::move(config_servers), opts) {}

  Task<void> put(Bytes key, Bytes value);
  Task<Bytes> get(Bytes key);
  // Sets key to value if it currently equals expect; returns "ok" on success.
  Task<Bytes> cond_put(Bytes key, Bytes expect, Bytes value);

  EoClerk& eo() { return eo_; }

 private:
  EoClerk eo_;
};

// Factory for the replica-side machine matching KvClerk.
VsmFactory kv_state_machine();

}  // namespace vrsm
