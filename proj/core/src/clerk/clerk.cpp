#include "vrsm/clerk/clerk.hpp"

#include "vrsm/common/marshal.hpp"
#include "vrsm/replica/replica_server.hpp"

namespace vrsm {

Clerk::Clerk(Env& env, std::vector<Address> config_servers, ClerkOptions opts)
    : env_(env), opts_(opts), config_clerk_(env, std::move(config_servers), opts.config) {}

RpcClient& Clerk::client(const Address& a) {
  auto it = clients_.find(a);
  if (it == clients_.end()) it = clients_.emplace(a, RpcClient(env_, a)).first;
  return it->second;
}

Task<void> Clerk::refresh() {
  auto config = co_await config_clerk_.get_config(opts_.config_deadline);
  if (config && !config->empty()) config_ = std::move(*config);
}

Task<void> Clerk::backoff(Nanos& delay) {
  retries_++;
  co_await env_.sleep(env_.random_duration(delay / 2, delay));
  delay = std::min(delay * 2, opts_.backoff_max);
}

namespace {

std::optional<Bytes> ok_payload(const std::optional<Bytes>& reply) {
  if (!reply) return std::nullopt;
  Decoder d(*reply);
  Err err = err_from_wire(d.u64());
  Bytes payload = d.bytes();
  if (!d.done() || err != Err::kOk) return std::nullopt;
  return payload;
}

}  // namespace

Task<Bytes> Clerk::apply(Bytes op) {
  Nanos delay = opts_.backoff_min;
  for (;;) {
    if (config_.empty()) co_await refresh();
    if (!config_.empty()) {
      auto reply = co_await client(config_[0]).call(replica_rpc::kApply, op, opts_.apply_timeout);
      auto payload = ok_payload(reply);
      if (payload) co_return std::move(*payload);
    }
    co_await backoff(delay);
    co_await refresh();
  }
}

Task<Bytes> Clerk::read(Bytes op) {
  Nanos delay = opts_.backoff_min;
  size_t failures = 0;
  for (;;) {
    if (config_.empty()) co_await refresh();
    if (!config_.empty()) {
      Address target = config_[env_.random_between(0, config_.size() - 1)];
      auto reply = co_await client(target).call(replica_rpc::kApplyReadonly, op, opts_.read_timeout);
      auto payload = ok_payload(reply);
      if (payload) co_return std::move(*payload);
      failures++;
    }
    co_await backoff(delay);
    if (config_.empty() || failures % config_.size() == 0) co_await refresh();
  }
}

}  // namespace vrsm
