#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "vrsm/lincheck/history.hpp"

namespace vrsm {

// Sequential specification used by the linearizability checker. States are
// strings so they can be memoized.
class Model {
 public:
  virtual ~Model() = default;
  virtual std::string name() const = 0;
  virtual std::string init() const = 0;
  // Key used to split the history into independent sub-histories, if the
  // model is a map of independent objects.
  virtual std::optional<std::string> partition(const Operation& op) const { return std::nullopt; }
  // Applies op to state. The bool is false when op completed with a result
  // the specification does not allow from this state.
  virtual std::pair<bool, std::string> step(const std::string& state, const Operation& op) const = 0;
};

// put(k, v) -> "", get(k) -> v, cond_put(k, expected, v) -> "ok" | "".
std::unique_ptr<Model> kv_model();
// inc() -> new value, get() -> value. Values are decimal strings.
std::unique_ptr<Model> counter_model();
// Cached KV: put(k, v) -> "", get(k) -> v, get_and_cache(k, ms) -> v.
std::unique_ptr<Model> cache_model();
// "kv", "counter", "cache"; nullptr for anything else.
std::unique_ptr<Model> model_by_name(const std::string& name);

}  // namespace vrsm
