#pragma once

#include <map>
#include <vector>

#include "vrsm/apps/lockservice.hpp"

namespace vrsm {

// Accounts in one vKV instance, guarded by per-account locks in another.
// Balances are decimal strings; a missing account reads as 0.
class Bank {
 public:
  Bank(KvClerk& balances, LockClerk& locks, std::vector<Bytes> accounts);

  Task<void> create_accounts(std::map<Bytes, uint64_t> initial);
  // No-op if src holds less than amount. Returns whether money moved.
  Task<bool> transfer(Bytes src, Bytes dst, uint64_t amount);
  // Sum of all balances under all locks.
  Task<uint64_t> audit();

 private:
  Task<uint64_t> balance(const Bytes& account);

  KvClerk& balances_;
  LockClerk& locks_;
  std::vector<Bytes> accounts_;
};

}  // namespace vrsm
