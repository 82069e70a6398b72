#include "vrsm/configservice/config_clerk.hpp"

#include "vrsm/common/marshal.hpp"
#include "vrsm/paxos/paxos.hpp"

namespace vrsm {

ConfigClerk::ConfigClerk(Env& env, std::vector<Address> servers, ConfigClerkOptions opts)
    : env_(env), opts_(opts) {
  for (auto& a : servers) servers_.emplace_back(env, std::move(a), opts_.rpc);
  if (!servers_.empty()) leader_ = env.random_between(0, servers_.size() - 1);
}

Task<void> ConfigClerk::nudge(TimeNs deadline) {
  for (size_t i = 0; i < servers_.size(); i++) {
    TimeNs now = env_.monotonic_now();
    if (now >= deadline) co_return;
    Nanos t = std::min(opts_.nudge_timeout, Nanos(deadline - now));
    auto reply = co_await servers_[i].call(paxos_rpc::kTryBecomeLeader, Bytes(), t);
    if (reply && !reply->empty() && (*reply)[0] == 1) {
      leader_ = i;
      co_return;
    }
  }
}

Task<std::pair<Err, Bytes>> ConfigClerk::leader_call(uint64_t rpc_id, Bytes args, Nanos call_timeout,
                                                     Nanos deadline_in) {
  TimeNs deadline = env_.monotonic_now() + to_ns(deadline_in);
  size_t failures = 0;
  while (!servers_.empty()) {
    TimeNs now = env_.monotonic_now();
    if (now >= deadline) break;
    Nanos t = std::min(call_timeout, Nanos(deadline - now));
    auto reply = co_await servers_[leader_].call(rpc_id, args, t);
    if (reply) {
      Decoder d(*reply);
      Err err = err_from_wire(d.u64());
      if (d.ok() && err != Err::kNotLeader && err != Err::kRetry) {
        co_return std::make_pair(err, Bytes(d.rest()));
      }
    }
    failures++;
    leader_ = (leader_ + 1) % servers_.size();
    if (failures % servers_.size() == 0) {
      co_await nudge(deadline);
      co_await env_.sleep(env_.random_duration(opts_.backoff, opts_.backoff * 4));
    }
  }
  co_return std::make_pair(Err::kTimeout, Bytes());
}

Task<std::optional<ConfigClerk::Reserved>> ConfigClerk::reserve_epoch_and_get_config(Nanos deadline) {
  auto [err, rest] = co_await leader_call(config_rpc::kReserveEpochAndGetConfig, Bytes(), opts_.rpc_timeout,
                                          deadline);
  if (err != Err::kOk) co_return std::nullopt;
  Decoder d(rest);
  Reserved r;
  r.epoch = d.u64();
  r.config = to_addresses(d.strings());
  if (!d.done()) co_return std::nullopt;
  co_return r;
}

Task<std::optional<std::vector<Address>>> ConfigClerk::get_config(Nanos deadline) {
  auto [err, rest] = co_await leader_call(config_rpc::kGetConfig, Bytes(), opts_.rpc_timeout, deadline);
  if (err != Err::kOk) co_return std::nullopt;
  Decoder d(rest);
  auto config = to_addresses(d.strings());
  if (!d.done()) co_return std::nullopt;
  co_return config;
}

Task<Err> ConfigClerk::try_write_config(uint64_t epoch, std::vector<Address> config, Nanos deadline) {
  Encoder e;
  e.u64(epoch).strings(to_strings(config));
  auto [err, rest] = co_await leader_call(config_rpc::kTryWriteConfig, e.take(), opts_.write_rpc_timeout, deadline);
  co_return err;
}

Task<ConfigClerk::Lease> ConfigClerk::get_lease(uint64_t epoch, Nanos deadline) {
  Encoder e;
  e.u64(epoch);
  auto [err, rest] = co_await leader_call(config_rpc::kGetLease, e.take(), opts_.rpc_timeout, deadline);
  Lease out;
  out.err = err;
  if (err == Err::kOk) {
    Decoder d(rest);
    out.expiration = d.u64();
    if (!d.done()) out.err = Err::kMalformed;
  }
  co_return out;
}

}  // namespace vrsm
