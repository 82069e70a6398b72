#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace vrsm {

// Opaque byte strings. std::string is used as the byte container throughout.
using Bytes = std::string;
using BytesView = std::string_view;

using Nanos = std::chrono::nanoseconds;
using TimeNs = uint64_t;

constexpr Nanos operator""_ms(unsigned long long v) { return std::chrono::milliseconds(v); }
constexpr Nanos operator""_us(unsigned long long v) { return std::chrono::microseconds(v); }
constexpr Nanos operator""_s(unsigned long long v) { return std::chrono::seconds(v); }

inline TimeNs to_ns(Nanos d) { return d.count() < 0 ? 0 : static_cast<TimeNs>(d.count()); }

}  // namespace vrsm
