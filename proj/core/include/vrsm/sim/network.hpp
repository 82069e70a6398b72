#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "vrsm/sim/simulator.hpp"
#include "vrsm/transport/fault_profile.hpp"

namespace vrsm::sim {

class SimEndpoint {
 public:
  virtual ~SimEndpoint() = default;
  virtual void deliver(uint64_t from_endpoint, NodeId from_node, Bytes msg) = 0;
};

// Simulated message network. Every send independently draws drop, duplicate
// and delay from the active fault profile; severed links drop everything.
class SimNetwork {
 public:
  explicit SimNetwork(Simulator& sim) : sim_(sim) {}

  void set_faults(const FaultProfile& f) { faults_ = f; }
  const FaultProfile& faults() const { return faults_; }

  void sever(NodeId a, NodeId b);
  void repair(NodeId a, NodeId b);
  // Severs every link between `node` and the rest.
  void isolate(NodeId node);
  void heal_all() { severed_.clear(); }
  bool link_up(NodeId a, NodeId b) const;

  uint64_t add_endpoint(NodeId node, std::weak_ptr<SimEndpoint> ep);
  void remove_endpoint(uint64_t id);
  bool bind(const Address& addr, uint64_t endpoint);
  void unbind_node(NodeId node);

  void send_to_address(NodeId from, uint64_t from_ep, const Address& to, Bytes msg);
  void send_to_endpoint(NodeId from, uint64_t from_ep, uint64_t to_ep, Bytes msg);

  struct Stats {
    uint64_t sent = 0;
    uint64_t delivered = 0;
    uint64_t dropped = 0;
    uint64_t duplicated = 0;
  };
  const Stats& stats() const { return stats_; }

 private:
  struct Endpoint {
    NodeId node;
    uint64_t incarnation;
    std::weak_ptr<SimEndpoint> ep;
  };
  void transmit(NodeId from, uint64_t from_ep, NodeId to_node, const std::string* to_addr, uint64_t to_ep, Bytes msg);
  void deliver(NodeId from, uint64_t from_ep, uint64_t to_ep, const Bytes& msg);

  Simulator& sim_;
  FaultProfile faults_;
  std::set<std::pair<NodeId, NodeId>> severed_;
  // With a fixed delay, links stay FIFO instead of breaking ties randomly.
  std::map<std::pair<NodeId, NodeId>, TimeNs> last_fixed_delivery_;
  std::map<uint64_t, Endpoint> endpoints_;
  std::map<std::string, uint64_t> bound_;
  std::map<std::string, NodeId> owner_;
  uint64_t next_endpoint_ = 1;
  Stats stats_;
};

}  // namespace vrsm::sim
