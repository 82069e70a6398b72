#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "vrsm/common/types.hpp"

namespace vrsm {

// Hooks reported by protocol code at safety-relevant points. The simulator
// forwards them to its global oracle; real deployments use the no-op default.
class Observer {
 public:
  virtual ~Observer() = default;

  // Replicated state machine.
  virtual void primary_applied(uint32_t service, uint64_t epoch, uint64_t index, BytesView op) {}
  virtual void backup_accepted(uint32_t service, uint64_t epoch, uint64_t index, BytesView op) {}
  virtual void backup_acked(uint32_t service, uint64_t epoch, uint64_t index) {}
  virtual void committed(uint32_t service, uint64_t epoch, uint64_t committed_next) {}
  virtual void sealed(uint32_t service, uint64_t epoch, uint64_t new_epoch, uint64_t next_index) {}
  virtual void entered_epoch(uint32_t service, uint64_t epoch, uint64_t next_index) {}
  virtual void became_primary(uint32_t service, uint64_t epoch, uint64_t next_index) {}
  virtual void replica_recovered(uint32_t service, uint64_t epoch, uint64_t next_index, bool sealed) {}
  virtual void lease_read(uint32_t service, uint64_t epoch) {}
  // The local read that followed a successful lease check has run.
  virtual void lease_read_done(uint32_t service, uint64_t epoch) {}

  // Paxos acceptor.
  virtual void paxos_accepted(uint32_t group, uint64_t epoch, uint64_t index, BytesView blob) {}
  virtual void paxos_acked(uint32_t group, bool promise, uint64_t epoch, uint64_t index) {}
  virtual void paxos_recovered(uint32_t group, uint64_t promised, uint64_t accepted_epoch,
                               uint64_t accepted_index) {}

  // Append-only state logger.
  // `epoch` is the header epoch the records belong to.
  virtual void log_appended(std::string_view file, uint64_t epoch, uint64_t index, BytesView record) {}
  virtual void log_acked(std::string_view file, uint64_t epoch, uint64_t durable_count) {}
  virtual void log_installed(std::string_view file, uint64_t epoch) {}
  virtual void log_recovered(std::string_view file, uint64_t epoch, const std::vector<Bytes>& records) {}
};

}  // namespace vrsm
