#pragma once

#include <cstdint>

#include "vrsm/common/types.hpp"

namespace vrsm {

// Bounded-uncertainty reading: true time t satisfies earliest <= t <= latest.
struct TimeRange {
  TimeNs earliest = 0;
  TimeNs latest = 0;
};

struct ClockConfig {
  // Maximum drift between the node's clock and true time.
  Nanos epsilon = std::chrono::milliseconds(50);
  // Fixed offset of the node's observed time; |offset| must not exceed epsilon.
  int64_t offset_ns = 0;
};

// Converts observed readings of one node into time ranges. `earliest` is kept
// non-decreasing across calls; `latest` is not.
class ClockModel {
 public:
  explicit ClockModel(ClockConfig cfg = {}) : cfg_(cfg) {}

  // `observed` is the node's raw clock reading, assumed within epsilon of true time.
  TimeRange range_from_observed(TimeNs observed);
  // Simulated clock: the node observes true time shifted by its configured offset.
  TimeRange range_at(TimeNs true_time);

  const ClockConfig& config() const { return cfg_; }

 private:
  ClockConfig cfg_;
  TimeNs last_earliest_ = 0;
};

// Time range from the host's realtime clock, using `epsilon` as the bound.
class RealClock {
 public:
  explicit RealClock(Nanos epsilon) : model_(ClockConfig{epsilon, 0}) {}
  TimeRange now();

 private:
  ClockModel model_;
};

}  // namespace vrsm
