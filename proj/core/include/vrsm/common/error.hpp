#pragma once

#include <cstdint>

namespace vrsm {

// Error codes shared by the wire protocol. Values are part of the wire format.
enum class Err : uint64_t {
  kOk = 0,
  kStale = 1,        // request epoch older than the server's
  kFutureEpoch = 2,  // request epoch newer than the server's
  kSealed = 3,
  kOutOfOrder = 4,
  kNotPrimary = 5,
  kEpochChanged = 6,
  kBackup = 7,       // a backup failed to accept
  kRetry = 8,
  kWrongEpoch = 9,
  kRefused = 10,
  kNotLeader = 11,
  kTimeout = 12,
  kUnavailable = 13,
  kMalformed = 14,
};

const char* err_name(Err e);

inline Err err_from_wire(uint64_t v) {
  return v <= static_cast<uint64_t>(Err::kMalformed) ? static_cast<Err>(v) : Err::kMalformed;
}

}  // namespace vrsm
