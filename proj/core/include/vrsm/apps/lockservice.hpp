#pragma once

#include "vrsm/kv/kv_clerk.hpp"

namespace vrsm {

struct LockedHandle {
  Bytes key;
  uint64_t owner = 0;
};

// Locks stored in vKV: a lock key holds "" when free and the owner id (as a
// decimal string) when held.
class LockClerk {
 public:
  LockClerk(Env& env, KvClerk& kv) : env_(env), kv_(kv) {}

  // Spins until the lock is ours.
  Task<LockedHandle> acquire(Bytes key);
  // False if the lock was not held by this handle.
  Task<bool> release(LockedHandle h);

 private:
  Env& env_;
  KvClerk& kv_;
};

}  // namespace vrsm
