#include "vrsm/configservice/config_server.hpp"

#include "vrsm/common/marshal.hpp"

namespace vrsm {

ConfigState initial_config_state(const std::vector<Address>& servers) {
  ConfigState s;
  s.reserved_epoch = 1;
  s.live_epoch = 1;
  s.config = servers;
  return s;
}

ConfigServer::ConfigServer(Env& env, ConfigServerOptions opts, std::unique_ptr<PaxosNode> paxos)
    : env_(env), opts_(std::move(opts)), paxos_(std::move(paxos)), op_mu_(env) {}

Task<std::unique_ptr<ConfigServer>> ConfigServer::recover(Env& env, ConfigServerOptions opts,
                                                          std::vector<Address> initial_config) {
  Bytes blob = encode_config_state(initial_config_state(initial_config));
  auto paxos = co_await PaxosNode::recover(env, opts.paxos, std::move(blob));
  co_return std::unique_ptr<ConfigServer>(new ConfigServer(env, std::move(opts), std::move(paxos)));
}

void ConfigServer::register_handlers(HandlerTable& table) {
  paxos_->register_handlers(table);
  table[config_rpc::kReserveEpochAndGetConfig] = [this](Bytes a) { return handle_reserve(std::move(a)); };
  table[config_rpc::kGetConfig] = [this](Bytes a) { return handle_get_config(std::move(a)); };
  table[config_rpc::kTryWriteConfig] = [this](Bytes a) { return handle_write_config(std::move(a)); };
  table[config_rpc::kGetLease] = [this](Bytes a) { return handle_get_lease(std::move(a)); };
}

Task<ConfigServer::Reserved> ConfigServer::reserve_epoch_and_get_config() {
  Reserved out;
  auto guard = co_await op_mu_.lock();
  if (!paxos_->is_leader()) {
    out.err = Err::kNotLeader;
    co_return out;
  }
  auto h = paxos_->begin();
  auto st = decode_config_state(h.state);
  if (!st) {
    out.err = Err::kMalformed;
    co_return out;
  }
  st->reserved_epoch++;
  Bytes next = encode_config_state(*st);
  out.err = co_await paxos_->commit(std::move(h), std::move(next));
  out.epoch = st->reserved_epoch;
  out.config = st->config;
  co_return out;
}

std::pair<Err, std::vector<Address>> ConfigServer::get_config() const {
  if (!paxos_->is_leader()) return {Err::kNotLeader, {}};
  auto st = decode_config_state(paxos_->weak_read());
  if (!st) return {Err::kMalformed, {}};
  return {Err::kOk, st->config};
}

Task<Err> ConfigServer::try_write_config(uint64_t epoch, std::vector<Address> config) {
  TimeNs deadline = env_.monotonic_now() + to_ns(opts_.write_wait_limit);
  for (;;) {
    {
      auto guard = co_await op_mu_.lock();
      if (!paxos_->is_leader()) co_return Err::kNotLeader;
      auto h = paxos_->begin();
      auto st = decode_config_state(h.state);
      if (!st) co_return Err::kMalformed;
      if (st->reserved_epoch != epoch) co_return Err::kStale;
      if (st->live_epoch == epoch && st->config == config) {
        // A retry of a write that already went live; the lease check was done
        // when the state was first proposed.
        if (paxos_->state_committed()) co_return Err::kOk;
        Bytes same = h.state;
        co_return co_await paxos_->commit(std::move(h), std::move(same));
      }
      if (env_.time_range().earliest > st->lease_expiration) {
        st->live_epoch = epoch;
        st->config = std::move(config);
        st->lease_expiration = 0;
        Bytes next = encode_config_state(*st);
        co_return co_await paxos_->commit(std::move(h), std::move(next));
      }
    }
    if (env_.monotonic_now() >= deadline) co_return Err::kRetry;
    co_await env_.sleep(opts_.write_poll);
  }
}

Task<ConfigServer::Lease> ConfigServer::get_lease(uint64_t epoch) {
  Lease out;
  auto guard = co_await op_mu_.lock();
  if (!paxos_->is_leader()) {
    out.err = Err::kNotLeader;
    co_return out;
  }
  auto h = paxos_->begin();
  auto st = decode_config_state(h.state);
  if (!st) {
    out.err = Err::kMalformed;
    co_return out;
  }
  if (epoch != st->live_epoch || st->reserved_epoch > st->live_epoch) {
    out.err = Err::kWrongEpoch;
    co_return out;
  }
  TimeNs latest = env_.time_range().latest;
  if (paxos_->state_committed() && st->lease_expiration >= latest + to_ns(opts_.lease_reuse_margin)) {
    out.expiration = st->lease_expiration;
    co_return out;
  }
  st->lease_expiration = std::max(st->lease_expiration, latest + to_ns(opts_.lease_duration));
  out.expiration = st->lease_expiration;
  Bytes next = encode_config_state(*st);
  out.err = co_await paxos_->commit(std::move(h), std::move(next));
  co_return out;
}

Task<Bytes> ConfigServer::handle_reserve(Bytes) {
  auto r = co_await reserve_epoch_and_get_config();
  Encoder e;
  e.u64(static_cast<uint64_t>(r.err)).u64(r.epoch).strings(to_strings(r.config));
  co_return e.take();
}

Task<Bytes> ConfigServer::handle_get_config(Bytes) {
  auto [err, config] = get_config();
  Encoder e;
  e.u64(static_cast<uint64_t>(err)).strings(to_strings(config));
  co_return e.take();
}

Task<Bytes> ConfigServer::handle_write_config(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  auto config = to_addresses(d.strings());
  Encoder e;
  if (!d.done()) {
    e.u64(static_cast<uint64_t>(Err::kMalformed));
    co_return e.take();
  }
  Err err = co_await try_write_config(epoch, std::move(config));
  e.u64(static_cast<uint64_t>(err));
  co_return e.take();
}

Task<Bytes> ConfigServer::handle_get_lease(Bytes args) {
  Decoder d(args);
  uint64_t epoch = d.u64();
  Encoder e;
  if (!d.done()) {
    e.u64(static_cast<uint64_t>(Err::kMalformed)).u64(0);
    co_return e.take();
  }
  auto r = co_await get_lease(epoch);
  e.u64(static_cast<uint64_t>(r.err)).u64(r.expiration);
  co_return e.take();
}

Task<void> run_config_server(Env& env, ConfigServerOptions opts, std::vector<Address> initial_config) {
  Address self = opts.paxos.peers.at(opts.paxos.id);
  auto server = co_await ConfigServer::recover(env, std::move(opts), std::move(initial_config));
  HandlerTable table;
  server->register_handlers(table);
  serve_rpc(env, self, std::move(table));
  co_await Env::park();
}

}  // namespace vrsm
