#pragma once

#include <memory>
#include <optional>

#include "vrsm/common/types.hpp"
#include "vrsm/runtime/task.hpp"
#include "vrsm/transport/address.hpp"

namespace vrsm {

// Message-oriented, unreliable connection. Messages may be lost, duplicated or
// reordered; send never blocks and never reports failure.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send(Bytes msg) = 0;
  // Next message from the peer, or nullopt once the connection is closed.
  virtual Task<std::optional<Bytes>> receive() = 0;
  virtual void close() = 0;
  virtual const Address& peer() const = 0;
};

struct Incoming {
  Bytes payload;
  // Sends go back to the originating connection.
  std::shared_ptr<Connection> reply;
};

class Listener {
 public:
  virtual ~Listener() = default;
  virtual Task<std::optional<Incoming>> receive() = 0;
  virtual void close() = 0;
};

}  // namespace vrsm
