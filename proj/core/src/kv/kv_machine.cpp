#include "vrsm/kv/kv_machine.hpp"

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_kv_op(const KvOp& op) {
  Encoder e;
  e.u8(static_cast<uint8_t>(op.tag)).bytes(op.key);
  switch (op.tag) {
    case KvTag::kPut:
      e.bytes(op.value);
      break;
    case KvTag::kGet:
      break;
    case KvTag::kCondPut:
      e.bytes(op.expect).bytes(op.value);
      break;
  }
  return e.take();
}

std::optional<KvOp> decode_kv_op(BytesView b) {
  Decoder d(b);
  KvOp op;
  uint8_t tag = d.u8();
  if (tag > 2) return std::nullopt;
  op.tag = static_cast<KvTag>(tag);
  op.key = d.bytes();
  if (op.tag == KvTag::kPut) op.value = d.bytes();
  if (op.tag == KvTag::kCondPut) {
    op.expect = d.bytes();
    op.value = d.bytes();
  }
  if (!d.done()) return std::nullopt;
  return op;
}

Bytes KvMachine::apply(BytesView raw, uint64_t index) {
  auto op = decode_kv_op(raw);
  if (!op) return Bytes();
  auto it = values_.find(op->key);
  Bytes current = it == values_.end() ? Bytes() : it->second;
  switch (op->tag) {
    case KvTag::kGet:
      return current;
    case KvTag::kPut:
      values_[op->key] = std::move(op->value);
      last_modified_[op->key] = index + 1;
      return Bytes();
    case KvTag::kCondPut:
      if (current != op->expect) return Bytes();
      values_[op->key] = std::move(op->value);
      last_modified_[op->key] = index + 1;
      return Bytes(kCondPutOk);
  }
  return Bytes();
}

std::pair<uint64_t, Bytes> KvMachine::read(BytesView raw) {
  auto op = decode_kv_op(raw);
  if (!op || op->tag != KvTag::kGet) return {0, Bytes()};
  auto it = values_.find(op->key);
  auto lm = last_modified_.find(op->key);
  return {lm == last_modified_.end() ? 0 : lm->second, it == values_.end() ? Bytes() : it->second};
}

Bytes KvMachine::get_state() const {
  Encoder e;
  e.u64(values_.size());
  for (const auto& [k, v] : values_) {
    auto lm = last_modified_.find(k);
    e.bytes(k).bytes(v).u64(lm == last_modified_.end() ? 0 : lm->second);
  }
  return e.take();
}

void KvMachine::set_state(BytesView snapshot, uint64_t) {
  values_.clear();
  last_modified_.clear();
  if (snapshot.empty()) return;
  Decoder d(snapshot);
  uint64_t n = d.u64();
  for (uint64_t i = 0; i < n && d.ok(); i++) {
    Bytes k = d.bytes();
    Bytes v = d.bytes();
    uint64_t lm = d.u64();
    if (!d.ok()) break;
    values_[k] = std::move(v);
    last_modified_[std::move(k)] = lm;
  }
}

Bytes CounterMachine::apply(BytesView op, uint64_t index) {
  if (op == "inc") {
    value_++;
    depends_on_ = index + 1;
  }
  return std::to_string(value_);
}

std::pair<uint64_t, Bytes> CounterMachine::read(BytesView) { return {depends_on_, std::to_string(value_)}; }

Bytes CounterMachine::get_state() const {
  Encoder e;
  e.u64(value_).u64(depends_on_);
  return e.take();
}

void CounterMachine::set_state(BytesView snapshot, uint64_t) {
  value_ = 0;
  depends_on_ = 0;
  if (snapshot.empty()) return;
  Decoder d(snapshot);
  value_ = d.u64();
  depends_on_ = d.u64();
}

}  // namespace vrsm
