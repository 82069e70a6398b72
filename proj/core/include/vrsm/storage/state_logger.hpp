#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vrsm/common/types.hpp"
#include "vrsm/runtime/env.hpp"

namespace vrsm {

struct LogHeader {
  uint64_t epoch = 0;
  bool sealed = false;
  Bytes snapshot;

  bool operator==(const LogHeader&) const = default;
};

// File layout: [epoch u64][sealed u8][snapLen u64][snap] then repeated
// [recLen u64][rec]. A partial trailing record is discarded on recovery.
Bytes encode_log_header(const LogHeader& h);
Bytes encode_log_record(BytesView rec);

struct ParsedLog {
  LogHeader header;
  std::vector<Bytes> records;
  // Length of the well-formed prefix.
  size_t valid_bytes = 0;
  bool torn = false;
};

// nullopt if the header itself is incomplete.
std::optional<ParsedLog> parse_log(BytesView file);

struct StorageOptions {
  Nanos flush_interval = std::chrono::milliseconds(5);
  // Test-only mutation: report durability before records are synced.
  bool ack_before_sync = false;
};

// Durable log of one epoch: a header with a state snapshot followed by
// buffered operation records flushed in the background.
class StateLogger {
 public:
  // Replays the file; a torn tail is truncated away before new appends. A
  // missing file is created with an empty epoch-0 header.
  static Task<std::unique_ptr<StateLogger>> recover(Env& env, std::string file, StorageOptions opts = {});
  ~StateLogger();
  StateLogger(const StateLogger&) = delete;
  StateLogger& operator=(const StateLogger&) = delete;

  const LogHeader& header() const;
  // Every record of the current epoch, durable or not.
  const std::vector<Bytes>& records() const;
  uint64_t durable_count() const;
  // Incremented each time the header is replaced.
  uint64_t generation() const;

  // Buffers a record and returns its position in the current epoch.
  uint64_t append(Bytes record);
  // Waits until the first `count` records are durable. Returns false if the
  // log was replaced by install() in the meantime.
  Task<bool> wait_durable(uint64_t count);
  // Atomically replaces the file with `header` and no records.
  Task<void> install(LogHeader header);
  // Durably sets the sealed flag, keeping and syncing every buffered record.
  Task<void> seal();

 private:
  struct State;
  explicit StateLogger(std::shared_ptr<State> st);
  static Task<void> sync_loop(std::shared_ptr<State> st);

  std::shared_ptr<State> st_;
};

}  // namespace vrsm
