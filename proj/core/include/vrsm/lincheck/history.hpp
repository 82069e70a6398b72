#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vrsm/common/types.hpp"

namespace vrsm {

// One client operation. Incomplete operations never returned; they may or
// may not have taken effect.
struct Operation {
  uint64_t client = 0;
  std::string op;
  std::vector<std::string> args;
  std::string result;
  TimeNs invoke = 0;
  TimeNs ret = 0;
  bool completed = false;

  bool operator==(const Operation&) const = default;
};

using History = std::vector<Operation>;

// One JSON object per line:
// {"client":1,"op":"put","args":["k","v"],"result":"","invoke":10,"return":12,"completed":true}
std::string history_to_jsonl(const History& h);
// Throws std::runtime_error on malformed input.
History history_from_jsonl(std::string_view text);

// Thread-safe collector of client operations.
class HistoryRecorder {
 public:
  explicit HistoryRecorder(std::function<TimeNs()> clock) : clock_(std::move(clock)) {}

  size_t invoke(uint64_t client, std::string op, std::vector<std::string> args);
  void complete(size_t id, std::string result);
  History snapshot() const;
  size_t size() const;
  size_t completed() const;

 private:
  std::function<TimeNs()> clock_;
  mutable std::mutex mu_;
  History ops_;
  size_t completed_ = 0;
};

}  // namespace vrsm
