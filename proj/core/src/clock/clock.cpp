#include "vrsm/clock/clock.hpp"

#include <algorithm>
#include <chrono>

namespace vrsm {

TimeRange ClockModel::range_from_observed(TimeNs observed) {
  TimeNs eps = to_ns(cfg_.epsilon);
  TimeNs lo = observed > eps ? observed - eps : 0;
  lo = std::max(lo, last_earliest_);
  last_earliest_ = lo;
  return TimeRange{lo, observed + eps};
}

TimeRange ClockModel::range_at(TimeNs true_time) {
  int64_t observed = static_cast<int64_t>(true_time) + cfg_.offset_ns;
  return range_from_observed(observed < 0 ? 0 : static_cast<TimeNs>(observed));
}

TimeRange RealClock::now() {
  auto t = std::chrono::system_clock::now().time_since_epoch();
  return model_.range_from_observed(static_cast<TimeNs>(std::chrono::duration_cast<Nanos>(t).count()));
}

}  // namespace vrsm
