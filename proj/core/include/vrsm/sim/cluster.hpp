#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vrsm/configservice/config_server.hpp"
#include "vrsm/kv/vsm.hpp"
#include "vrsm/replica/replica_server.hpp"
#include "vrsm/sim/simulator.hpp"

namespace vrsm::sim {

struct ClusterOptions {
  // Prepended to node names and addresses, so several clusters can share a
  // simulator.
  std::string prefix;
  // Replica service id and Paxos group id.
  uint32_t service = 1;
  size_t config_servers = 3;
  // Servers of the first epoch.
  size_t replicas = 3;
  // Extra replica nodes that only join through reconfiguration.
  size_t spare_replicas = 0;
  VsmFactory factory;
  // Every node gets this epsilon and a random offset within it.
  Nanos epsilon = std::chrono::milliseconds(50);
  // Templates; addresses and peers are filled in per node.
  ConfigServerOptions config;
  ReplicaOptions replica;
};

// The server side of a deployment inside a simulator: configuration servers,
// replicas, and a bootstrap node that initializes the first epoch.
class Cluster {
 public:
  Cluster(Simulator& sim, ClusterOptions opts);

  // Starts every server and the bootstrap node.
  void start();
  bool bootstrapped() const { return *bootstrapped_; }

  NodeId add_client(std::string name, NodeProgram program);
  ClockConfig random_clock();

  const std::vector<Address>& config_addresses() const { return config_addrs_; }
  const std::vector<Address>& replica_addresses() const { return replica_addrs_; }
  std::vector<Address> initial_config() const;
  NodeId config_node(size_t i) const { return config_nodes_.at(i); }
  NodeId replica_node(size_t i) const { return replica_nodes_.at(i); }
  const std::vector<NodeId>& config_nodes() const { return config_nodes_; }
  const std::vector<NodeId>& replica_nodes() const { return replica_nodes_; }
  NodeId node_of(const Address& a) const;
  const ClusterOptions& options() const { return opts_; }

 private:
  Simulator& sim_;
  ClusterOptions opts_;
  std::vector<Address> config_addrs_;
  std::vector<Address> replica_addrs_;
  std::vector<NodeId> config_nodes_;
  std::vector<NodeId> replica_nodes_;
  NodeId bootstrap_node_ = kNoNode;
  std::shared_ptr<bool> bootstrapped_ = std::make_shared<bool>(false);
};

}  // namespace vrsm::sim
