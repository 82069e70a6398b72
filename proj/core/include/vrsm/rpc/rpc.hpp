#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <unordered_map>

#include "vrsm/common/types.hpp"
#include "vrsm/runtime/env.hpp"

namespace vrsm {

enum class FrameKind : uint8_t { kRequest = 0, kReply = 1 };

// [kind u8][seqno u64][rpcId u64, requests only][payloadLen u64][payload]
struct RpcFrame {
  FrameKind kind = FrameKind::kRequest;
  uint64_t seqno = 0;
  uint64_t rpc_id = 0;
  Bytes payload;
};

Bytes encode_frame(const RpcFrame& f);
std::optional<RpcFrame> decode_frame(BytesView data);

using RpcHandler = std::function<Task<Bytes>(Bytes args)>;
using HandlerTable = std::unordered_map<uint64_t, RpcHandler>;

// Listens on `addr` and runs the matching handler for every request received,
// including retransmitted duplicates. Handlers run concurrently. Requests with
// unknown ids or malformed frames are dropped.
void serve_rpc(Env& env, const Address& addr, HandlerTable handlers);

struct RpcOptions {
  Nanos initial_retransmit = std::chrono::milliseconds(100);
  Nanos max_retransmit = std::chrono::seconds(1);
};

// Client for one server address. Requests are retransmitted with exponential
// backoff until a reply arrives or the timeout elapses. Copies share one
// connection, which closes when the last copy goes away.
class RpcClient {
 public:
  RpcClient(Env& env, Address peer, RpcOptions opts = {});

  // Reply payload, or nullopt on timeout.
  Task<std::optional<Bytes>> call(uint64_t rpc_id, Bytes args, Nanos timeout);
  const Address& peer() const;

 private:
  struct Impl;
  struct Owner;
  static Task<void> receive_loop(std::shared_ptr<Impl> impl);
  std::shared_ptr<Owner> owner_;
};

}  // namespace vrsm
