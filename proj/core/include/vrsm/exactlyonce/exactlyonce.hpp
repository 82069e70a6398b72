#pragma once

#include <map>
#include <memory>
#include <optional>

#include "vrsm/clerk/clerk.hpp"
#include "vrsm/kv/vsm.hpp"

namespace vrsm {

struct OpEnvelope {
  uint64_t client_id = 0;
  uint64_t seq = 0;
  uint8_t kind = 0;
  Bytes payload;

  bool operator==(const OpEnvelope&) const = default;
};

// [clientId u64][seq u64][kind u8][payloadLen u64][payload]
Bytes encode_envelope(const OpEnvelope& env);
std::optional<OpEnvelope> decode_envelope(BytesView b);

// Deduplicates enveloped operations by (client, seq). A duplicate of the
// client's latest operation gets the cached reply; older ones get "".
class ExactlyOnceMachine final : public VersionedStateMachine {
 public:
  explicit ExactlyOnceMachine(std::unique_ptr<VersionedStateMachine> inner) : inner_(std::move(inner)) {}

  Bytes apply(BytesView op, uint64_t index) override;
  // Reads are not enveloped and go straight to the inner machine.
  std::pair<uint64_t, Bytes> read(BytesView op) override { return inner_->read(op); }
  Bytes get_state() const override;
  void set_state(BytesView snapshot, uint64_t next_index) override;

  VersionedStateMachine& inner() { return *inner_; }

 private:
  struct Entry {
    uint64_t last_seq = 0;
    Bytes reply;
  };
  std::unique_ptr<VersionedStateMachine> inner_;
  std::map<uint64_t, Entry> table_;
};

VsmFactory exactly_once(VsmFactory inner);

// Clerk whose writes are applied exactly once: each carries a random client
// id and a sequence number, so retried submissions are deduplicated.
class EoClerk {
 public:
  EoClerk(Env& env, std::vector<Address> config_servers, ClerkOptions opts = {});

  Task<Bytes> apply(Bytes op);
  Task<Bytes> read(Bytes op) { return clerk_.read(std::move(op)); }

  uint64_t client_id() const { return client_id_; }
  Clerk& clerk() { return clerk_; }

 private:
  Clerk clerk_;
  uint64_t client_id_;
  uint64_t seq_ = 0;
};

}  // namespace vrsm
