#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vrsm/common/types.hpp"

namespace vrsm {

// Little-endian encoder for the wire and disk formats.
class Encoder {
 public:
  Encoder& u8(uint8_t v) {
    buf_.push_back(static_cast<char>(v));
    return *this;
  }
  Encoder& u64(uint64_t v) {
    for (int i = 0; i < 8; i++) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    return *this;
  }
  // Length-prefixed (u64) byte string.
  Encoder& bytes(BytesView v) {
    u64(v.size());
    buf_.append(v);
    return *this;
  }
  Encoder& raw(BytesView v) {
    buf_.append(v);
    return *this;
  }
  Encoder& strings(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) bytes(s);
    return *this;
  }

  const Bytes& view() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Decoder over a borrowed buffer. Reads past the end set a sticky failure flag
// and return zero values; callers check ok() once at the end.
class Decoder {
 public:
  explicit Decoder(BytesView in) : in_(in) {}

  uint8_t u8() {
    if (!need(1)) return 0;
    uint8_t v = static_cast<uint8_t>(in_[pos_]);
    pos_ += 1;
    return v;
  }
  uint64_t u64() {
    if (!need(8)) return 0;
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= static_cast<uint64_t>(static_cast<uint8_t>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  Bytes bytes() {
    uint64_t n = u64();
    if (!need(n)) return {};
    Bytes v(in_.substr(pos_, n));
    pos_ += n;
    return v;
  }
  std::vector<std::string> strings() {
    uint64_t n = u64();
    std::vector<std::string> out;
    // Each element needs at least its 8-byte length prefix.
    if (!ok_ || n > remaining() / 8) {
      ok_ = false;
      return out;
    }
    out.reserve(n);
    for (uint64_t i = 0; i < n && ok_; i++) out.push_back(bytes());
    return out;
  }
  BytesView rest() {
    BytesView v = in_.substr(pos_);
    pos_ = in_.size();
    return v;
  }

  size_t remaining() const { return in_.size() - pos_; }
  size_t position() const { return pos_; }
  bool ok() const { return ok_; }
  bool done() const { return ok_ && pos_ == in_.size(); }

 private:
  bool need(uint64_t n) {
    if (!ok_ || n > in_.size() - pos_) {
      ok_ = false;
      return false;
    }
    return true;
  }

  BytesView in_;
  size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace vrsm
