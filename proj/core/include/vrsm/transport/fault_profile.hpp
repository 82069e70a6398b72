#pragma once

#include "vrsm/common/types.hpp"

namespace vrsm {

// Per-message network faults applied by the simulated transport.
struct FaultProfile {
  double drop = 0.0;
  double duplicate = 0.0;
  Nanos min_delay = std::chrono::milliseconds(1);
  Nanos max_delay = std::chrono::milliseconds(1);
};

}  // namespace vrsm
