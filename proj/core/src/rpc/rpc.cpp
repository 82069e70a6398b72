#include "vrsm/rpc/rpc.hpp"

#include <algorithm>

#include "vrsm/common/marshal.hpp"
#include "vrsm/runtime/sync.hpp"

namespace vrsm {

Bytes encode_frame(const RpcFrame& f) {
  Encoder e;
  e.u8(static_cast<uint8_t>(f.kind)).u64(f.seqno);
  if (f.kind == FrameKind::kRequest) e.u64(f.rpc_id);
  e.bytes(f.payload);
  return e.take();
}

std::optional<RpcFrame> decode_frame(BytesView data) {
  Decoder d(data);
  RpcFrame f;
  uint8_t kind = d.u8();
  if (kind > 1) return std::nullopt;
  f.kind = static_cast<FrameKind>(kind);
  f.seqno = d.u64();
  if (f.kind == FrameKind::kRequest) f.rpc_id = d.u64();
  f.payload = d.bytes();
  if (!d.done()) return std::nullopt;
  return f;
}

namespace {

Task<void> run_handler(std::shared_ptr<HandlerTable> table, uint64_t rpc_id, uint64_t seqno, Bytes args,
                       std::shared_ptr<Connection> reply_to) {
  auto it = table->find(rpc_id);
  if (it == table->end()) co_return;
  Bytes reply = co_await it->second(std::move(args));
  reply_to->send(encode_frame(RpcFrame{FrameKind::kReply, seqno, 0, std::move(reply)}));
}

Task<void> accept_loop(Env& env, std::shared_ptr<Listener> listener, std::shared_ptr<HandlerTable> table) {
  for (;;) {
    auto in = co_await listener->receive();
    if (!in) co_return;
    auto frame = decode_frame(in->payload);
    if (!frame || frame->kind != FrameKind::kRequest) continue;
    env.spawn(run_handler(table, frame->rpc_id, frame->seqno, std::move(frame->payload), std::move(in->reply)));
  }
}

}  // namespace

void serve_rpc(Env& env, const Address& addr, HandlerTable handlers) {
  auto listener = env.listen(addr);
  env.spawn(accept_loop(env, std::move(listener), std::make_shared<HandlerTable>(std::move(handlers))));
}

struct RpcClient::Impl {
  struct Pending {
    explicit Pending(Env& env) : cv(env) {}
    std::optional<Bytes> reply;
    Notifier cv;
  };

  Impl(Env& e, Address p, RpcOptions o) : env(e), peer(std::move(p)), opts(o) {}

  Env& env;
  Address peer;
  RpcOptions opts;
  std::shared_ptr<Connection> conn;
  uint64_t next_seq = 1;
  std::unordered_map<uint64_t, std::shared_ptr<Pending>> pending;
  bool loop_running = false;
};

// Closes the connection when the last client copy is dropped so the receive
// loop, which only holds the Impl, can exit.
struct RpcClient::Owner {
  std::shared_ptr<Impl> impl;
  ~Owner() {
    if (impl->conn) impl->conn->close();
  }
};

Task<void> RpcClient::receive_loop(std::shared_ptr<Impl> impl) {
  auto conn = impl->conn;
  for (;;) {
    auto msg = co_await conn->receive();
    if (!msg) break;
    auto frame = decode_frame(*msg);
    if (!frame || frame->kind != FrameKind::kReply) continue;
    auto it = impl->pending.find(frame->seqno);
    if (it == impl->pending.end() || it->second->reply) continue;
    it->second->reply = std::move(frame->payload);
    it->second->cv.notify_all();
  }
  impl->loop_running = false;
}

RpcClient::RpcClient(Env& env, Address peer, RpcOptions opts)
    : owner_(std::make_shared<Owner>(Owner{std::make_shared<Impl>(env, std::move(peer), opts)})) {}

const Address& RpcClient::peer() const { return owner_->impl->peer; }

Task<std::optional<Bytes>> RpcClient::call(uint64_t rpc_id, Bytes args, Nanos timeout) {
  auto owner = owner_;
  auto impl = owner->impl;
  Env& env = impl->env;
  if (!impl->conn) impl->conn = env.connect(impl->peer);
  if (!impl->loop_running) {
    impl->loop_running = true;
    env.spawn(receive_loop(impl));
  }
  uint64_t seq = impl->next_seq++;
  Bytes frame = encode_frame(RpcFrame{FrameKind::kRequest, seq, rpc_id, std::move(args)});
  auto pending = std::make_shared<Impl::Pending>(env);
  impl->pending[seq] = pending;

  TimeNs deadline = env.monotonic_now() + to_ns(timeout);
  Nanos interval = impl->opts.initial_retransmit;
  impl->conn->send(frame);
  while (!pending->reply) {
    TimeNs now = env.monotonic_now();
    if (now >= deadline) break;
    TimeNs wait = std::min<TimeNs>(to_ns(interval), deadline - now);
    co_await pending->cv.wait(Nanos(wait));
    if (pending->reply || env.monotonic_now() >= deadline) break;
    impl->conn->send(frame);
    interval = std::min(interval * 2, impl->opts.max_retransmit);
  }
  impl->pending.erase(seq);
  co_return std::move(pending->reply);
}

}  // namespace vrsm
