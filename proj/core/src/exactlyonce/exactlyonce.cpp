#include "vrsm/exactlyonce/exactlyonce.hpp"

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_envelope(const OpEnvelope& env) {
  Encoder e;
  e.u64(env.client_id).u64(env.seq).u8(env.kind).bytes(env.payload);
  return e.take();
}

std::optional<OpEnvelope> decode_envelope(BytesView b) {
  Decoder d(b);
  OpEnvelope env;
  env.client_id = d.u64();
  env.seq = d.u64();
  env.kind = d.u8();
  env.payload = d.bytes();
  if (!d.done()) return std::nullopt;
  return env;
}

Bytes ExactlyOnceMachine::apply(BytesView op, uint64_t index) {
  auto env = decode_envelope(op);
  if (!env) return Bytes();
  auto& entry = table_[env->client_id];
  if (env->seq == entry.last_seq && env->seq != 0) return entry.reply;
  if (env->seq < entry.last_seq) return Bytes();
  entry.reply = inner_->apply(env->payload, index);
  entry.last_seq = env->seq;
  return entry.reply;
}

Bytes ExactlyOnceMachine::get_state() const {
  Encoder e;
  e.u64(table_.size());
  for (const auto& [client, entry] : table_) e.u64(client).u64(entry.last_seq).bytes(entry.reply);
  e.bytes(inner_->get_state());
  return e.take();
}

void ExactlyOnceMachine::set_state(BytesView snapshot, uint64_t next_index) {
  table_.clear();
  if (snapshot.empty()) {
    inner_->set_state(snapshot, next_index);
    return;
  }
  Decoder d(snapshot);
  uint64_t n = d.u64();
  for (uint64_t i = 0; i < n && d.ok(); i++) {
    uint64_t client = d.u64();
    Entry entry;
    entry.last_seq = d.u64();
    entry.reply = d.bytes();
    if (d.ok()) table_[client] = std::move(entry);
  }
  Bytes inner = d.bytes();
  inner_->set_state(inner, next_index);
}

EoClerk::EoClerk(Env& env, std::vector<Address> config_servers, ClerkOptions opts)
    : clerk_(env, std::move(config_servers), opts), client_id_(env.random_u64()) {}

Task<Bytes> EoClerk::apply(Bytes op) {
  OpEnvelope env;
  env.client_id = client_id_;
  env.seq = ++seq_;
  env.payload = std::move(op);
  co_return co_await clerk_.apply(encode_envelope(env));
}

VsmFactory exactly_once(VsmFactory inner) {
  return [inner = std::move(inner)] { return std::make_unique<ExactlyOnceMachine>(inner()); };
}

}  // namespace vrsm
