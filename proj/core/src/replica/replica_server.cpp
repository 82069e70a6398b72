#include "vrsm/replica/replica_server.hpp"

#include <random>

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_epoch_state(const EpochState& s) {
  Encoder e;
  e.u64(s.next_index).bytes(s.snapshot);
  return e.take();
}

std::optional<EpochState> decode_epoch_state(BytesView b) {
  Decoder d(b);
  EpochState s;
  s.next_index = d.u64();
  s.snapshot = d.bytes();
  if (!d.done()) return std::nullopt;
  return s;
}

namespace {

Task<void> send_commit_index(RpcClient client, Bytes args, Nanos timeout) {
  co_await client.call(replica_rpc::kIncreaseCommitIndex, std::move(args), timeout);
}

}  // namespace

struct ReplicaServer::Fanout {
  explicit Fanout(Env& env) : cv(env) {}
  int pending = 0;
  bool failed = false;
  Notifier cv;
};

ReplicaServer::ReplicaServer(Env& env, ReplicaOptions opts, VsmFactory factory)
    : env_(env),
      opts_(std::move(opts)),
      factory_(std::move(factory)),
      config_(env, opts_.config_servers, opts_.config_clerk),
      mu_(env),
      state_cv_(env),
      commit_cv_(env) {}

Task<std::unique_ptr<ReplicaServer>> ReplicaServer::recover(Env& env, ReplicaOptions opts, VsmFactory factory) {
  std::unique_ptr<ReplicaServer> s(new ReplicaServer(env, std::move(opts), std::move(factory)));
  s->logger_ = co_await StateLogger::recover(env, s->opts_.log_file, s->opts_.storage);
  s->vsm_ = s->factory_();
  const LogHeader& h = s->logger_->header();
  EpochState base;
  if (!h.snapshot.empty()) {
    auto st = decode_epoch_state(h.snapshot);
    if (!st) throw std::runtime_error("corrupt replica log header");
    base = std::move(*st);
  }
  s->vsm_->set_state(base.snapshot, base.next_index);
  const auto& records = s->logger_->records();
  for (uint64_t i = 0; i < records.size(); i++) s->vsm_->apply(records[i], base.next_index + i);
  s->epoch_ = h.epoch;
  s->epoch_start_ = base.next_index;
  s->next_index_ = base.next_index + records.size();
  s->sealed_ = h.sealed;
  env.observer().replica_recovered(s->opts_.service, s->epoch_, s->next_index_, s->sealed_);
  co_return s;
}

void ReplicaServer::register_handlers(HandlerTable& t) {
  t[replica_rpc::kApply] = [this](Bytes a) { return handle_apply(std::move(a)); };
  t[replica_rpc::kApplyAsBackup] = [this](Bytes a) { return handle_apply_as_backup(std::move(a)); };
  t[replica_rpc::kApplyReadonly] = [this](Bytes a) { return handle_apply_readonly(std::move(a)); };
  t[replica_rpc::kGetStateAndSeal] = [this](Bytes a) { return handle_seal(std::move(a)); };
  t[replica_rpc::kSetNewEpochState] = [this](Bytes a) { return handle_set_state(std::move(a)); };
  t[replica_rpc::kBecomePrimary] = [this](Bytes a) { return handle_become_primary(std::move(a)); };
  t[replica_rpc::kIncreaseCommitIndex] = [this](Bytes a) { return handle_increase_commit(std::move(a)); };
}

void ReplicaServer::start_background() {
  env_.spawn(lease_loop());
  env_.spawn(broadcast_loop());
}

void ReplicaServer::advance_committed(uint64_t committed_next) {
  if (committed_next <= committed_) return;
  committed_ = committed_next;
  env_.observer().committed(opts_.service, epoch_, committed_);
  commit_cv_.notify_all();
}

Task<ReplicaServer::Reply> ReplicaServer::apply(Bytes op) {
  Reply out;
  uint64_t epoch = 0;
  uint64_t index = 0;
  uint64_t pos = 0;
  std::vector<RpcClient> backups;
  {
    auto guard = co_await mu_.lock();
    if (!primary_) {
      out.err = Err::kNotPrimary;
      co_return out;
    }
    if (sealed_) {
      out.err = Err::kSealed;
      co_return out;
    }
    epoch = epoch_;
    index = next_index_++;
    out.payload = vsm_->apply(op, index);
    pos = logger_->append(op);
    env_.observer().primary_applied(opts_.service, epoch, index, op);
    backups = backups_;
  }

  Encoder e;
  e.u64(epoch).u64(index).bytes(op);
  Bytes args = e.take();
  auto fan = std::make_shared<Fanout>(env_);
  for (auto& b : backups) {
    fan->pending++;
    env_.spawn(send_to_backup(fan, b, epoch, args));
  }
  bool durable = co_await logger_->wait_durable(pos + 1);
  if (!durable) fan->failed = true;
  while (fan->pending > 0 && !fan->failed) co_await fan->cv.wait();

  if (epoch_ != epoch) {
    out.err = Err::kEpochChanged;
  } else if (fan->failed) {
    out.err = Err::kBackup;
  } else {
    advance_committed(index + 1);
  }
  if (out.err != Err::kOk) out.payload.clear();
  co_return out;
}

Task<void> ReplicaServer::send_to_backup(std::shared_ptr<Fanout> f, RpcClient client, uint64_t epoch, Bytes args) {
  for (;;) {
    if (epoch_ != epoch || f->failed) {
      f->failed = true;
      break;
    }
    auto reply = co_await client.call(replica_rpc::kApplyAsBackup, args, opts_.backup_rpc_timeout);
    if (!reply) continue;
    Decoder d(*reply);
    Err err = err_from_wire(d.u64());
    if (err == Err::kOk) break;
    if (err == Err::kStale || err == Err::kSealed || err == Err::kMalformed) {
      f->failed = true;
      break;
    }
    co_await env_.sleep(opts_.backup_retry_delay);
  }
  f->pending--;
  f->cv.notify_all();
}

Task<Err> ReplicaServer::apply_as_backup(uint64_t epoch, uint64_t index, Bytes op) {
  TimeNs deadline = env_.monotonic_now() + to_ns(opts_.out_of_order_wait);
  for (;;) {
    auto guard = co_await mu_.lock();
    if (epoch < epoch_) co_return Err::kStale;
    if (epoch > epoch_) co_return Err::kFutureEpoch;
    if (index < next_index_) {
      // Retransmission of an accepted operation: acknowledge once durable.
      if (index < epoch_start_) co_return Err::kOk;
      uint64_t pos = index - epoch_start_;
      guard.unlock();
      if (!opts_.backup_ack_before_durable) {
        bool ok = co_await logger_->wait_durable(pos + 1);
        if (!ok || epoch_ != epoch) co_return Err::kStale;
      }
      env_.observer().backup_acked(opts_.service, epoch, index);
      co_return Err::kOk;
    }
    if (sealed_) co_return Err::kSealed;
    if (index == next_index_) {
      vsm_->apply(op, index);
      uint64_t pos = logger_->append(op);
      next_index_++;
      env_.observer().backup_accepted(opts_.service, epoch, index, op);
      state_cv_.notify_all();
      guard.unlock();
      if (!opts_.backup_ack_before_durable) {
        bool ok = co_await logger_->wait_durable(pos + 1);
        if (!ok) co_return Err::kStale;
      }
      env_.observer().backup_acked(opts_.service, epoch, index);
      co_return Err::kOk;
    }
    guard.unlock();
    TimeNs now = env_.monotonic_now();
    if (now >= deadline) co_return Err::kOutOfOrder;
    co_await state_cv_.wait(Nanos(deadline - now));
  }
}

Task<bool> ReplicaServer::wait_for_committed(uint64_t epoch, uint64_t index) {
  TimeNs deadline = env_.monotonic_now() + to_ns(opts_.wait_committed_timeout);
  while (epoch_ == epoch && committed_ < index) {
    TimeNs now = env_.monotonic_now();
    if (now >= deadline) co_return false;
    co_await commit_cv_.wait(Nanos(deadline - now));
  }
  co_return epoch_ == epoch && committed_ >= index;
}

Task<ReplicaServer::Reply> ReplicaServer::apply_readonly(Bytes op) {
  Reply out;
  uint64_t epoch = 0;
  uint64_t need = 0;
  {
    auto guard = co_await mu_.lock();
    if (epoch_ == 0 || lease_expiration_ <= env_.time_range().latest) {
      out.err = Err::kRetry;
      co_return out;
    }
    env_.observer().lease_read(opts_.service, epoch_);
    if (opts_.pause_after_lease_check > Nanos(0) &&
        std::bernoulli_distribution(opts_.pause_probability)(env_.rng())) {
      co_await env_.sleep(opts_.pause_after_lease_check);
    }
    epoch = epoch_;
    auto [index, reply] = vsm_->read(op);
    env_.observer().lease_read_done(opts_.service, epoch);
    need = opts_.read_waits_for_next_index ? next_index_ : index;
    out.payload = std::move(reply);
  }
  if (!co_await wait_for_committed(epoch, need)) {
    out.err = Err::kRetry;
    out.payload.clear();
  }
  co_return out;
}

Task<ReplicaServer::SealReply> ReplicaServer::get_state_and_seal(uint64_t new_epoch) {
  SealReply out;
  auto guard = co_await mu_.lock();
  if (new_epoch <= epoch_) {
    out.err = Err::kStale;
    co_return out;
  }
  if (!sealed_) {
    sealed_ = true;
    co_await logger_->seal();
  }
  env_.observer().sealed(opts_.service, epoch_, new_epoch, next_index_);
  out.state.next_index = next_index_;
  out.state.snapshot = vsm_->get_state();
  co_return out;
}

Task<ReplicaServer::EpochReply> ReplicaServer::set_new_epoch_state(uint64_t new_epoch, EpochState state) {
  EpochReply out;
  auto guard = co_await mu_.lock();
  if (new_epoch <= epoch_) {
    out.err = Err::kStale;
    out.epoch = epoch_;
    co_return out;
  }
  LogHeader header;
  header.epoch = new_epoch;
  header.snapshot = encode_epoch_state(state);
  co_await logger_->install(std::move(header));
  vsm_ = factory_();
  vsm_->set_state(state.snapshot, state.next_index);
  epoch_ = new_epoch;
  epoch_start_ = state.next_index;
  next_index_ = state.next_index;
  committed_ = 0;
  sealed_ = false;
  primary_ = false;
  can_become_primary_ = true;
  lease_expiration_ = 0;
  backups_.clear();
  env_.observer().entered_epoch(opts_.service, epoch_, next_index_);
  state_cv_.notify_all();
  commit_cv_.notify_all();
  out.epoch = epoch_;
  co_return out;
}

Task<Err> ReplicaServer::become_primary(uint64_t epoch, std::vector<Address> config) {
  auto guard = co_await mu_.lock();
  if (epoch != epoch_ || sealed_) co_return Err::kWrongEpoch;
  if (primary_) co_return Err::kOk;
  if (!can_become_primary_) co_return Err::kWrongEpoch;
  primary_ = true;
  can_become_primary_ = false;
  backups_.clear();
  for (auto& a : config) {
    if (a != opts_.self) backups_.emplace_back(env_, a);
  }
  env_.observer().became_primary(opts_.service, epoch_, next_index_);
  advance_committed(next_index_);
  co_return Err::kOk;
}

Err ReplicaServer::increase_commit_index(uint64_t epoch, uint64_t committed_next) {
  if (epoch != epoch_) return Err::kStale;
  advance_committed(std::min(committed_next, next_index_));
  return Err::kOk;
}

Task<void> ReplicaServer::lease_loop() {
  for (;;) {
    uint64_t epoch = epoch_;
    if (epoch > 0 && !sealed_) {
      auto lease = co_await config_.get_lease(epoch, opts_.lease_request_deadline);
      if (lease.err == Err::kOk && epoch_ == epoch) lease_expiration_ = std::max(lease_expiration_, lease.expiration);
    }
    co_await env_.sleep(opts_.lease_renew_interval);
  }
}

Task<void> ReplicaServer::broadcast_loop() {
  uint64_t last_epoch = 0;
  uint64_t last_sent = 0;
  for (int tick = 0;; tick++) {
    co_await env_.sleep(opts_.commit_broadcast_interval);
    if (!primary_) continue;
    bool changed = epoch_ != last_epoch || committed_ != last_sent;
    if (!changed && tick % opts_.commit_resend_ticks != 0) continue;
    last_epoch = epoch_;
    last_sent = committed_;
    Encoder e;
    e.u64(epoch_).u64(committed_);
    Bytes args = e.take();
    for (auto& b : backups_) {
      // One transmission; a lost update is covered by the next one.
      env_.spawn(send_commit_index(b, args, opts_.commit_broadcast_interval * 2));
    }
  }
}

namespace {

Bytes err_reply(Err err) {
  Encoder e;
  e.u64(static_cast<uint64_t>(err));
  return e.take();
}

}  // namespace

Task<Bytes> ReplicaServer::handle_apply(Bytes args) {
  auto r = co_await apply(std::move(args));
  Encoder e;
  e.u64(static_cast<uint64_t>(r.err)).bytes(r.payload);
  co_return e.take();
}

Task<Bytes> ReplicaServer::handle_apply_as_backup(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  uint64_t index = d.u64();
  Bytes op = d.bytes();
  if (!d.done()) co_return err_reply(Err::kMalformed);
  Err err = co_await apply_as_backup(epoch, index, std::move(op));
  co_return err_reply(err);
}

Task<Bytes> ReplicaServer::handle_apply_readonly(Bytes args) {
  auto r = co_await apply_readonly(std::move(args));
  Encoder e;
  e.u64(static_cast<uint64_t>(r.err)).bytes(r.payload);
  co_return e.take();
}

Task<Bytes> ReplicaServer::handle_seal(Bytes args) {
  Decoder d(args);
  uint64_t new_epoch = d.u64();
  if (!d.done()) co_return err_reply(Err::kMalformed);
  auto r = co_await get_state_and_seal(new_epoch);
  Encoder e;
  e.u64(static_cast<uint64_t>(r.err)).raw(encode_epoch_state(r.state));
  co_return e.take();
}

Task<Bytes> ReplicaServer::handle_set_state(Bytes args) {
  Decoder d(args);
  uint64_t new_epoch = d.u64();
  auto st = decode_epoch_state(d.rest());
  if (!d.ok() || !st) co_return err_reply(Err::kMalformed);
  auto r = co_await set_new_epoch_state(new_epoch, std::move(*st));
  Encoder e;
  e.u64(static_cast<uint64_t>(r.err)).u64(r.epoch);
  co_return e.take();
}

Task<Bytes> ReplicaServer::handle_become_primary(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  auto config = to_addresses(d.strings());
  if (!d.done()) co_return err_reply(Err::kMalformed);
  Err err = co_await become_primary(epoch, std::move(config));
  co_return err_reply(err);
}

Task<Bytes> ReplicaServer::handle_increase_commit(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  uint64_t committed = d.u64();
  if (!d.done()) co_return err_reply(Err::kMalformed);
  co_return err_reply(increase_commit_index(epoch, committed));
}

Task<void> run_replica_server(Env& env, ReplicaOptions opts, VsmFactory factory) {
  Address self = opts.self;
  auto server = co_await ReplicaServer::recover(env, std::move(opts), std::move(factory));
  HandlerTable table;
  server->register_handlers(table);
  serve_rpc(env, self, std::move(table));
  server->start_background();
  co_await Env::park();
}

}  // namespace vrsm
