#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "vrsm/lincheck/history.hpp"
#include "vrsm/lincheck/model.hpp"

namespace vrsm {

struct CheckOptions {
  // Search steps per partition before giving up with ResourceLimitError.
  uint64_t max_steps = 50'000'000;
  // Look for the shortest failing prefix when a violation is found.
  bool minimize = true;
};

struct CheckResult {
  bool ok = true;
  // Partition key of the failing sub-history (empty for unpartitioned models).
  std::string partition;
  // Shortest failing prefix of the failing sub-history: operations invoked up
  // to some time T, with operations still running at T marked incomplete.
  History prefix;
  uint64_t steps = 0;

  std::string describe() const;
};

class ResourceLimitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Wing-Gong style search with memoization on (linearized set, state).
// Histories of map-like models are split per key first.
CheckResult check_linearizable(const History& h, const Model& model, const CheckOptions& opts = {});

}  // namespace vrsm
