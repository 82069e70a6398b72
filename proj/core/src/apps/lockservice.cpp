#include "vrsm/apps/lockservice.hpp"

namespace vrsm {

Task<LockedHandle> LockClerk::acquire(Bytes key) {
  LockedHandle h{std::move(key), env_.random_between(1, UINT64_MAX)};
  Bytes owner = std::to_string(h.owner);
  for (;;) {
    Bytes resp = co_await kv_.cond_put(h.key, "", owner);
    if (resp == kCondPutOk) co_return h;
    co_await env_.sleep(env_.random_duration(std::chrono::milliseconds(1), std::chrono::milliseconds(10)));
  }
}

Task<bool> LockClerk::release(LockedHandle h) {
  Bytes resp = co_await kv_.cond_put(h.key, std::to_string(h.owner), "");
  co_return resp == kCondPutOk;
}

}  // namespace vrsm
