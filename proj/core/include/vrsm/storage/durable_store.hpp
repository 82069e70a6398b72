#pragma once

#include <optional>
#include <string>

#include "vrsm/common/types.hpp"
#include "vrsm/runtime/task.hpp"

namespace vrsm {

// Named files that survive crashes. Each operation is durable once its task
// completes. A crash during append may leave any prefix of the appended bytes;
// a crash during write_atomic leaves either the old or the new contents.
class DurableStore {
 public:
  virtual ~DurableStore() = default;
  virtual Task<std::optional<Bytes>> read(std::string name) = 0;
  virtual Task<void> append(std::string name, Bytes data) = 0;
  virtual Task<void> write_atomic(std::string name, Bytes data) = 0;
};

}  // namespace vrsm
