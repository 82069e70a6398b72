#pragma once

#include <map>
#include <optional>

#include "vrsm/kv/kv_clerk.hpp"

namespace vrsm {

// vKV value of a cached key: [leaseExpiration u64 LE][value]. Absent keys
// ("" in vKV) decode as {0, ""}.
struct LeaseValue {
  TimeNs lease_expiration = 0;
  Bytes value;

  bool operator==(const LeaseValue&) const = default;
};

Bytes encode_lease_value(const LeaseValue& v);
// nullopt for a non-empty string shorter than the expiration prefix.
std::optional<LeaseValue> decode_lease_value(BytesView b);

// Client-side cache over vKV. A cached key carries a lease stored alongside
// the value; writers wait for the lease to expire before changing the value.
class CacheKv {
 public:
  CacheKv(Env& env, KvClerk& kv) : env_(env), kv_(kv) {}

  // Leases the key for at least `cachetime` and caches its value.
  Task<Bytes> get_and_cache(Bytes key, Nanos cachetime);
  Task<Bytes> get(Bytes key);
  Task<void> put(Bytes key, Bytes value);

  bool cached(const Bytes& key);
  // Number of vKV requests issued by get().
  uint64_t backend_reads() const { return backend_reads_; }

 private:
  struct CachedValue {
    Bytes v;
    TimeNs l = 0;
  };

  Env& env_;
  KvClerk& kv_;
  std::map<Bytes, CachedValue> cache_;
  uint64_t backend_reads_ = 0;
};

}  // namespace vrsm
