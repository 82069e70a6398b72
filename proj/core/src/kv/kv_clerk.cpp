#include "vrsm/kv/kv_clerk.hpp"

namespace vrsm {

Task<void> KvClerk::put(Bytes key, Bytes value) {
  auto op = KvOp::put(std::move(key), std::move(value));
  co_await eo_.apply(encode_kv_op(op));
}

Task<Bytes> KvClerk::get(Bytes key) {
  auto op = KvOp::get(std::move(key));
  co_return co_await eo_.read(encode_kv_op(op));
}

Task<Bytes> KvClerk::cond_put(Bytes key, Bytes expect, Bytes value) {
  auto op = KvOp::cond_put(std::move(key), std::move(expect), std::move(value));
  co_return co_await eo_.apply(encode_kv_op(op));
}

VsmFactory kv_state_machine() {
  return exactly_once([] { return std::make_unique<KvMachine>(); });
}

}  // namespace vrsm
