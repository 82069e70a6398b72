#include "vrsm/common/error.hpp"

namespace vrsm {

const char* err_name(Err e) {
  switch (e) {
    case Err::kOk: return "ok";
    case Err::kStale: return "stale";
    case Err::kFutureEpoch: return "future-epoch";
    case Err::kSealed: return "sealed";
    case Err::kOutOfOrder: return "out-of-order";
    case Err::kNotPrimary: return "not-primary";
    case Err::kEpochChanged: return "epoch-changed";
    case Err::kBackup: return "backup";
    case Err::kRetry: return "retry";
    case Err::kWrongEpoch: return "wrong-epoch";
    case Err::kRefused: return "refused";
    case Err::kNotLeader: return "not-leader";
    case Err::kTimeout: return "timeout";
    case Err::kUnavailable: return "unavailable";
    case Err::kMalformed: return "malformed";
  }
  return "unknown";
}

}  // namespace vrsm
