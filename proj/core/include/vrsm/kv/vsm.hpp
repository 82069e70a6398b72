#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <utility>

#include "vrsm/common/types.hpp"

namespace vrsm {

// Deterministic state machine that also reports which log prefix a read
// depends on.
class VersionedStateMachine {
 public:
  virtual ~VersionedStateMachine() = default;

  // Applies the operation at log position `index` (0-based).
  virtual Bytes apply(BytesView op, uint64_t index) = 0;
  // Evaluates a read-only operation. The first element is the length of the
  // log prefix the result depends on: the reply is stable once that many
  // operations are committed.
  virtual std::pair<uint64_t, Bytes> read(BytesView op) = 0;
  // Snapshot of the state. An empty snapshot is the initial state.
  virtual Bytes get_state() const = 0;
  virtual void set_state(BytesView snapshot, uint64_t next_index) = 0;
};

using VsmFactory = std::function<std::unique_ptr<VersionedStateMachine>()>;

}  // namespace vrsm
