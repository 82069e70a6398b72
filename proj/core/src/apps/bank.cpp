#include "vrsm/apps/bank.hpp"

#include <algorithm>
#include <stdexcept>

namespace vrsm {

Bank::Bank(KvClerk& balances, LockClerk& locks, std::vector<Bytes> accounts)
    : balances_(balances), locks_(locks), accounts_(std::move(accounts)) {
  std::sort(accounts_.begin(), accounts_.end());
}

Task<void> Bank::create_accounts(std::map<Bytes, uint64_t> initial) {
  for (const auto& [account, amount] : initial) co_await balances_.put(account, std::to_string(amount));
}

Task<uint64_t> Bank::balance(const Bytes& account) {
  Bytes v = co_await balances_.get(account);
  co_return v.empty() ? 0 : std::stoull(v);
}

Task<bool> Bank::transfer(Bytes src, Bytes dst, uint64_t amount) {
  if (src == dst) throw std::invalid_argument("transfer to the same account");
  Bytes first = std::min(src, dst);
  Bytes second = std::max(src, dst);
  LockedHandle l1 = co_await locks_.acquire(first);
  LockedHandle l2 = co_await locks_.acquire(second);
  uint64_t from = co_await balance(src);
  uint64_t to = co_await balance(dst);
  bool moved = from >= amount;
  if (moved) {
    co_await balances_.put(src, std::to_string(from - amount));
    co_await balances_.put(dst, std::to_string(to + amount));
  }
  co_await locks_.release(std::move(l2));
  co_await locks_.release(std::move(l1));
  co_return moved;
}

Task<uint64_t> Bank::audit() {
  std::vector<LockedHandle> held;
  for (const auto& a : accounts_) held.push_back(co_await locks_.acquire(a));
  uint64_t total = 0;
  for (const auto& a : accounts_) total += co_await balance(a);
  for (auto it = held.rbegin(); it != held.rend(); ++it) co_await locks_.release(*it);
  co_return total;
}

}  // namespace vrsm
