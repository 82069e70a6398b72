#include "vrsm/apps/cachekv.hpp"

#include <algorithm>

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_lease_value(const LeaseValue& v) {
  Encoder e;
  e.u64(v.lease_expiration).raw(v.value);
  return e.take();
}

std::optional<LeaseValue> decode_lease_value(BytesView b) {
  if (b.empty()) return LeaseValue{};
  Decoder d(b);
  LeaseValue v;
  v.lease_expiration = d.u64();
  v.value = Bytes(d.rest());
  if (!d.ok()) return std::nullopt;
  return v;
}

Task<Bytes> CacheKv::get_and_cache(Bytes key, Nanos cachetime) {
  for (;;) {
    Bytes enc = co_await kv_.get(key);
    auto old = decode_lease_value(enc);
    if (!old) throw std::runtime_error("cache: undecodable value");
    TimeNs latest = env_.time_range().latest;
    LeaseValue next{std::max(latest + to_ns(cachetime), old->lease_expiration), old->value};
    Bytes resp = co_await kv_.cond_put(key, enc, encode_lease_value(next));
    if (resp == kCondPutOk) {
      cache_[key] = CachedValue{old->value, next.lease_expiration};
      co_return old->value;
    }
  }
}

Task<Bytes> CacheKv::get(Bytes key) {
  auto it = cache_.find(key);
  if (it != cache_.end() && env_.time_range().latest < it->second.l) co_return it->second.v;
  if (it != cache_.end()) cache_.erase(it);
  backend_reads_++;
  Bytes enc = co_await kv_.get(key);
  auto v = decode_lease_value(enc);
  if (!v) throw std::runtime_error("cache: undecodable value");
  co_return v->value;
}

Task<void> CacheKv::put(Bytes key, Bytes value) {
  for (;;) {
    Bytes enc = co_await kv_.get(key);
    auto old = decode_lease_value(enc);
    if (!old) throw std::runtime_error("cache: undecodable value");
    TimeRange now = env_.time_range();
    if (now.earliest <= old->lease_expiration) {
      Nanos wait(static_cast<int64_t>(old->lease_expiration - now.earliest) + 1);
      co_await env_.sleep(wait);
      continue;
    }
    LeaseValue next{old->lease_expiration, value};
    Bytes resp = co_await kv_.cond_put(key, enc, encode_lease_value(next));
    if (resp == kCondPutOk) co_return;
  }
}

bool CacheKv::cached(const Bytes& key) {
  auto it = cache_.find(key);
  return it != cache_.end() && env_.time_range().latest < it->second.l;
}

}  // namespace vrsm
