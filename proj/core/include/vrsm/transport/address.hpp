#pragma once

#include <compare>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace vrsm {

// Network address. Simulated nodes use plain node names; real deployments use
// "host:port".
class Address {
 public:
  Address() = default;
  explicit Address(std::string s) : s_(std::move(s)) {}

  const std::string& str() const { return s_; }
  bool empty() const { return s_.empty(); }

  auto operator<=>(const Address&) const = default;

 private:
  std::string s_;
};

inline std::ostream& operator<<(std::ostream& os, const Address& a) { return os << a.str(); }

std::vector<std::string> to_strings(const std::vector<Address>& v);
std::vector<Address> to_addresses(const std::vector<std::string>& v);

}  // namespace vrsm

template <>
struct std::hash<vrsm::Address> {
  size_t operator()(const vrsm::Address& a) const noexcept { return std::hash<std::string>()(a.str()); }
};
