#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "vrsm/configservice/config_server.hpp"
#include "vrsm/kv/vsm.hpp"
#include "vrsm/real/real_env.hpp"
#include "vrsm/replica/replica_server.hpp"

namespace vrsm::real {

// Ports that were free a moment ago on 127.0.0.1. All are bound at once so
// they are distinct.
std::vector<uint16_t> pick_free_ports(size_t n);

struct LoopbackOptions {
  // Each node stores its files in a subdirectory named after it.
  std::filesystem::path data_dir;
  size_t config_servers = 3;
  size_t replicas = 3;
  size_t spare_replicas = 2;
  uint32_t service = 1;
  VsmFactory factory;
  Nanos epsilon = std::chrono::milliseconds(50);
  ConfigServerOptions config;
  ReplicaOptions replica;
};

// A whole deployment in one process and one event loop, over real TCP on
// 127.0.0.1 and real files.
class LoopbackCluster {
 public:
  LoopbackCluster(boost::asio::io_context& io, LoopbackOptions opts);
  ~LoopbackCluster();

  // Starts every server and a bootstrap task that initializes epoch 1.
  void start();
  bool bootstrapped() const { return *bootstrapped_; }

  RealEnv& add_client(const std::string& name);

  const std::vector<Address>& config_addresses() const { return config_addrs_; }
  const std::vector<Address>& replica_addresses() const { return replica_addrs_; }
  std::vector<Address> initial_config() const;

  // Stops every node.
  void shutdown();
  // Failures reported by any node.
  std::vector<std::string> failures() const;

 private:
  RealEnv& add_env(const std::string& name);

  boost::asio::io_context& io_;
  LoopbackOptions opts_;
  std::vector<Address> config_addrs_;
  std::vector<Address> replica_addrs_;
  std::vector<std::unique_ptr<RealEnv>> envs_;
  std::shared_ptr<bool> bootstrapped_ = std::make_shared<bool>(false);
};

}  // namespace vrsm::real
