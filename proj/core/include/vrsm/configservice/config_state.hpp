#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "vrsm/common/types.hpp"
#include "vrsm/transport/address.hpp"

namespace vrsm {

// Replicated configuration record. A new epoch may go live only after
// lease_expiration has passed.
struct ConfigState {
  uint64_t reserved_epoch = 0;
  uint64_t live_epoch = 0;
  TimeNs lease_expiration = 0;
  std::vector<Address> config;

  bool operator==(const ConfigState&) const = default;
};

// [reserved u64][live u64][lease u64][count u64] then length-prefixed addresses.
Bytes encode_config_state(const ConfigState& s);
std::optional<ConfigState> decode_config_state(BytesView b);

namespace config_rpc {
constexpr uint64_t kReserveEpochAndGetConfig = 20;
constexpr uint64_t kGetConfig = 21;
constexpr uint64_t kTryWriteConfig = 22;
constexpr uint64_t kGetLease = 23;
}  // namespace config_rpc

}  // namespace vrsm
