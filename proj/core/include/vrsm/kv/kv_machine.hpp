#pragma once

#include <map>
#include <optional>
#include <string>

#include "vrsm/kv/vsm.hpp"

namespace vrsm {

enum class KvTag : uint8_t { kPut = 0, kGet = 1, kCondPut = 2 };

struct KvOp {
  KvTag tag = KvTag::kGet;
  Bytes key;
  Bytes expect;
  Bytes value;

  static KvOp put(Bytes key, Bytes value) { return KvOp{KvTag::kPut, std::move(key), {}, std::move(value)}; }
  static KvOp get(Bytes key) { return KvOp{KvTag::kGet, std::move(key), {}, {}}; }
  static KvOp cond_put(Bytes key, Bytes expect, Bytes value) {
    return KvOp{KvTag::kCondPut, std::move(key), std::move(expect), std::move(value)};
  }
  bool operator==(const KvOp&) const = default;
};

// Put: [0][key][val]; Get: [1][key]; CondPut: [2][key][expect][val]. Fields are
// u64-length-prefixed.
Bytes encode_kv_op(const KvOp& op);
std::optional<KvOp> decode_kv_op(BytesView b);

// Reply of a successful conditional put.
inline constexpr std::string_view kCondPutOk = "ok";

// String map. Missing keys read as "".
class KvMachine final : public VersionedStateMachine {
 public:
  Bytes apply(BytesView op, uint64_t index) override;
  std::pair<uint64_t, Bytes> read(BytesView op) override;
  Bytes get_state() const override;
  void set_state(BytesView snapshot, uint64_t next_index) override;

  const std::map<Bytes, Bytes>& values() const { return values_; }

 private:
  std::map<Bytes, Bytes> values_;
  // Log prefix length covering the last write of each key.
  std::map<Bytes, uint64_t> last_modified_;
};

// Integer counter: "inc" increments and returns the new value, "get" returns it.
class CounterMachine final : public VersionedStateMachine {
 public:
  Bytes apply(BytesView op, uint64_t index) override;
  std::pair<uint64_t, Bytes> read(BytesView op) override;
  Bytes get_state() const override;
  void set_state(BytesView snapshot, uint64_t next_index) override;

  uint64_t value() const { return value_; }

 private:
  uint64_t value_ = 0;
  // Log prefix length covering the last increment.
  uint64_t depends_on_ = 0;
};

}  // namespace vrsm
