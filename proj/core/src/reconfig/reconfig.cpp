#include "vrsm/reconfig/reconfig.hpp"

#include "vrsm/common/marshal.hpp"

namespace vrsm {

namespace {

struct Broadcast {
  explicit Broadcast(Env& env) : cv(env) {}
  size_t pending = 0;
  bool failed = false;
  Notifier cv;
};

Task<void> install_on(std::shared_ptr<Broadcast> b, RpcClient client, uint64_t epoch, Bytes args, Nanos timeout) {
  auto reply = co_await client.call(replica_rpc::kSetNewEpochState, std::move(args), timeout);
  bool ok = false;
  if (reply) {
    Decoder d(*reply);
    Err err = err_from_wire(d.u64());
    uint64_t server_epoch = d.u64();
    // An equal epoch means an earlier attempt of this same step landed.
    ok = d.done() && (err == Err::kOk || (err == Err::kStale && server_epoch == epoch));
  }
  if (!ok) b->failed = true;
  b->pending--;
  b->cv.notify_all();
}

Task<bool> install_everywhere(Env& env, const std::vector<Address>& servers, uint64_t epoch, const EpochState& st,
                              Nanos timeout) {
  Encoder e;
  e.u64(epoch).raw(encode_epoch_state(st));
  Bytes args = e.take();
  auto b = std::make_shared<Broadcast>(env);
  for (const auto& s : servers) {
    b->pending++;
    env.spawn(install_on(b, RpcClient(env, s), epoch, args, timeout));
  }
  while (b->pending > 0) co_await b->cv.wait();
  co_return !b->failed;
}

Task<Err> promote(Env& env, const std::vector<Address>& servers, uint64_t epoch, Nanos deadline_in) {
  Encoder e;
  e.u64(epoch).strings(to_strings(servers));
  Bytes args = e.take();
  RpcClient client(env, servers.at(0));
  TimeNs deadline = env.monotonic_now() + to_ns(deadline_in);
  for (;;) {
    TimeNs now = env.monotonic_now();
    if (now >= deadline) co_return Err::kTimeout;
    auto reply = co_await client.call(replica_rpc::kBecomePrimary, args, Nanos(deadline - now));
    if (!reply) continue;
    Decoder d(*reply);
    Err err = err_from_wire(d.u64());
    co_return d.done() ? err : Err::kMalformed;
  }
}

}  // namespace

Task<Err> reconfigure(Env& env, ConfigClerk& config, std::vector<Address> new_servers, ReconfigOptions opts) {
  if (new_servers.empty()) co_return Err::kMalformed;
  auto reserved = co_await config.reserve_epoch_and_get_config(opts.reserve_deadline);
  if (!reserved) co_return Err::kUnavailable;
  uint64_t epoch = reserved->epoch;
  const auto& old = reserved->config;
  if (old.empty()) co_return Err::kUnavailable;

  std::optional<EpochState> state;
  size_t start = env.random_between(0, old.size() - 1);
  Encoder e;
  e.u64(epoch);
  Bytes seal_args = e.take();
  for (size_t k = 0; k < old.size() && !state; k++) {
    RpcClient client(env, old[(start + k) % old.size()]);
    auto reply = co_await client.call(replica_rpc::kGetStateAndSeal, seal_args, opts.seal_timeout);
    if (!reply) continue;
    Decoder d(*reply);
    Err err = err_from_wire(d.u64());
    auto st = decode_epoch_state(d.rest());
    if (d.ok() && err == Err::kOk && st) state = std::move(st);
  }
  if (!state) co_return Err::kUnavailable;

  bool installed = co_await install_everywhere(env, new_servers, epoch, *state, opts.set_state_timeout);
  if (!installed) co_return Err::kUnavailable;

  Err err = co_await config.try_write_config(epoch, new_servers, opts.write_config_deadline);
  if (err != Err::kOk) co_return err;
  co_return co_await promote(env, new_servers, epoch, opts.become_primary_deadline);
}

Task<Err> initialize_replicas(Env& env, std::vector<Address> servers, Nanos deadline_in) {
  if (servers.empty()) co_return Err::kMalformed;
  TimeNs deadline = env.monotonic_now() + to_ns(deadline_in);
  EpochState empty;
  for (;;) {
    bool installed = co_await install_everywhere(env, servers, 1, empty, std::chrono::seconds(2));
    if (installed) {
      Err err = co_await promote(env, servers, 1, std::chrono::seconds(3));
      if (err == Err::kOk) co_return Err::kOk;
    }
    if (env.monotonic_now() >= deadline) co_return Err::kTimeout;
    co_await env.sleep(std::chrono::milliseconds(100));
  }
}

}  // namespace vrsm
