#include "vrsm/configservice/config_state.hpp"

#include "vrsm/common/marshal.hpp"

namespace vrsm {

Bytes encode_config_state(const ConfigState& s) {
  Encoder e;
  e.u64(s.reserved_epoch).u64(s.live_epoch).u64(s.lease_expiration).strings(to_strings(s.config));
  return e.take();
}

std::optional<ConfigState> decode_config_state(BytesView b) {
  Decoder d(b);
  ConfigState s;
  s.reserved_epoch = d.u64();
  s.live_epoch = d.u64();
  s.lease_expiration = d.u64();
  s.config = to_addresses(d.strings());
  if (!d.done()) return std::nullopt;
  return s;
}

}  // namespace vrsm
