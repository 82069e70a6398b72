#include "vrsm/storage/state_logger.hpp"

#include "vrsm/common/marshal.hpp"
#include "vrsm/runtime/sync.hpp"

namespace vrsm {

Bytes encode_log_header(const LogHeader& h) {
  Encoder e;
  e.u64(h.epoch).u8(h.sealed ? 1 : 0).bytes(h.snapshot);
  return e.take();
}

Bytes encode_log_record(BytesView rec) {
  Encoder e;
  e.bytes(rec);
  return e.take();
}

std::optional<ParsedLog> parse_log(BytesView file) {
  Decoder d(file);
  ParsedLog out;
  out.header.epoch = d.u64();
  out.header.sealed = d.u8() != 0;
  out.header.snapshot = d.bytes();
  if (!d.ok()) return std::nullopt;
  out.valid_bytes = d.position();
  while (d.remaining() > 0) {
    Bytes rec = d.bytes();
    if (!d.ok()) {
      out.torn = true;
      break;
    }
    out.records.push_back(std::move(rec));
    out.valid_bytes = d.position();
  }
  return out;
}

struct StateLogger::State {
  State(Env& e, std::string f, StorageOptions o) : env(e), file(std::move(f)), opts(o), mu(e), dirty(e), synced(e) {}

  Env& env;
  std::string file;
  StorageOptions opts;
  LogHeader header;
  std::vector<Bytes> records;
  uint64_t durable = 0;
  uint64_t generation = 0;
  int waiters = 0;
  bool closed = false;
  AsyncMutex mu;
  Notifier dirty;
  Notifier synced;
};

StateLogger::StateLogger(std::shared_ptr<State> st) : st_(std::move(st)) {}

StateLogger::~StateLogger() {
  st_->closed = true;
  st_->dirty.notify_all();
  st_->synced.notify_all();
}

Task<std::unique_ptr<StateLogger>> StateLogger::recover(Env& env, std::string file, StorageOptions opts) {
  auto st = std::make_shared<State>(env, file, opts);
  auto data = co_await env.store().read(file);
  std::optional<ParsedLog> parsed;
  if (data) parsed = parse_log(*data);
  if (!parsed) {
    Bytes fresh = encode_log_header(LogHeader{});
    co_await env.store().write_atomic(file, fresh);
  } else {
    if (parsed->torn) {
      co_await env.store().write_atomic(file, data->substr(0, parsed->valid_bytes));
    }
    st->header = std::move(parsed->header);
    st->records = std::move(parsed->records);
    st->durable = st->records.size();
  }
  env.observer().log_recovered(file, st->header.epoch, st->records);
  env.spawn(sync_loop(st));
  co_return std::unique_ptr<StateLogger>(new StateLogger(st));
}

const LogHeader& StateLogger::header() const { return st_->header; }
const std::vector<Bytes>& StateLogger::records() const { return st_->records; }
uint64_t StateLogger::durable_count() const { return st_->durable; }
uint64_t StateLogger::generation() const { return st_->generation; }

uint64_t StateLogger::append(Bytes record) {
  uint64_t pos = st_->records.size();
  st_->env.observer().log_appended(st_->file, st_->header.epoch, pos, record);
  st_->records.push_back(std::move(record));
  st_->dirty.notify_all();
  return pos;
}

Task<bool> StateLogger::wait_durable(uint64_t count) {
  auto st = st_;
  uint64_t gen = st->generation;
  uint64_t epoch = st->header.epoch;
  if (!st->opts.ack_before_sync) {
    st->waiters++;
    while (!st->closed && st->generation == gen && st->durable < count) {
      st->dirty.notify_all();
      co_await st->synced.wait();
    }
    st->waiters--;
    if (st->closed || st->generation != gen || st->durable < count) co_return false;
  } else if (st->generation != gen) {
    co_return false;
  }
  st->env.observer().log_acked(st->file, epoch, count);
  co_return true;
}

Task<void> StateLogger::install(LogHeader header) {
  auto st = st_;
  auto guard = co_await st->mu.lock();
  co_await st->env.store().write_atomic(st->file, encode_log_header(header));
  st->header = std::move(header);
  st->records.clear();
  st->durable = 0;
  st->generation++;
  st->env.observer().log_installed(st->file, st->header.epoch);
  st->synced.notify_all();
}

Task<void> StateLogger::seal() {
  auto st = st_;
  auto guard = co_await st->mu.lock();
  LogHeader h = st->header;
  h.sealed = true;
  Bytes data = encode_log_header(h);
  uint64_t count = st->records.size();
  for (uint64_t i = 0; i < count; i++) data += encode_log_record(st->records[i]);
  co_await st->env.store().write_atomic(st->file, std::move(data));
  st->header.sealed = true;
  st->durable = std::max(st->durable, count);
  st->synced.notify_all();
}

Task<void> StateLogger::sync_loop(std::shared_ptr<State> st) {
  for (;;) {
    while (!st->closed && st->durable >= st->records.size()) co_await st->dirty.wait();
    if (st->closed) co_return;
    // Batch appends unless someone is already waiting for durability.
    if (st->waiters == 0) co_await st->env.sleep(st->opts.flush_interval);
    auto guard = co_await st->mu.lock();
    if (st->closed) co_return;
    uint64_t from = st->durable;
    uint64_t to = st->records.size();
    if (from >= to) continue;
    uint64_t gen = st->generation;
    Bytes data;
    for (uint64_t i = from; i < to; i++) data += encode_log_record(st->records[i]);
    co_await st->env.store().append(st->file, std::move(data));
    if (gen == st->generation) st->durable = std::max(st->durable, to);
    st->synced.notify_all();
  }
}

}  // namespace vrsm
