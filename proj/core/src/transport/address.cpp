#include "vrsm/transport/address.hpp"

namespace vrsm {

std::vector<std::string> to_strings(const std::vector<Address>& v) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& a : v) out.push_back(a.str());
  return out;
}

std::vector<Address> to_addresses(const std::vector<std::string>& v) {
  std::vector<Address> out;
  out.reserve(v.size());
  for (const auto& s : v) out.emplace_back(s);
  return out;
}

}  // namespace vrsm
