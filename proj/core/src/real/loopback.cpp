#include "vrsm/real/loopback.hpp"

#include <boost/asio/ip/tcp.hpp>

#include "vrsm/kv/kv_clerk.hpp"
#include "vrsm/reconfig/reconfig.hpp"

namespace vrsm::real {
namespace asio = boost::asio;
using tcp = asio::ip::tcp;

namespace {

Task<void> bootstrap(Env& env, std::vector<Address> servers, std::shared_ptr<bool> done) {
  while (!*done) {
    Err err = co_await initialize_replicas(env, servers, std::chrono::seconds(30));
    if (err == Err::kOk) *done = true;
  }
}

Address local(uint16_t port) { return Address("127.0.0.1:" + std::to_string(port)); }

}  // namespace

std::vector<uint16_t> pick_free_ports(size_t n) {
  asio::io_context io;
  std::vector<tcp::acceptor> held;
  std::vector<uint16_t> ports;
  for (size_t i = 0; i < n; i++) {
    held.emplace_back(io, tcp::endpoint(asio::ip::make_address("127.0.0.1"), 0));
    ports.push_back(held.back().local_endpoint().port());
  }
  return ports;
}

LoopbackCluster::LoopbackCluster(asio::io_context& io, LoopbackOptions opts) : io_(io), opts_(std::move(opts)) {
  if (!opts_.factory) opts_.factory = kv_state_machine();
  size_t nr = opts_.replicas + opts_.spare_replicas;
  auto ports = pick_free_ports(opts_.config_servers + nr);
  for (size_t i = 0; i < opts_.config_servers; i++) config_addrs_.push_back(local(ports[i]));
  for (size_t i = 0; i < nr; i++) replica_addrs_.push_back(local(ports[opts_.config_servers + i]));
}

LoopbackCluster::~LoopbackCluster() { shutdown(); }

std::vector<Address> LoopbackCluster::initial_config() const {
  return {replica_addrs_.begin(), replica_addrs_.begin() + static_cast<ptrdiff_t>(opts_.replicas)};
}

RealEnv& LoopbackCluster::add_env(const std::string& name) {
  RealEnvOptions eo;
  eo.name = name;
  eo.data_dir = opts_.data_dir / name;
  eo.epsilon = opts_.epsilon;
  envs_.push_back(std::make_unique<RealEnv>(io_, eo));
  return *envs_.back();
}

void LoopbackCluster::start() {
  auto initial = initial_config();
  for (size_t i = 0; i < config_addrs_.size(); i++) {
    ConfigServerOptions o = opts_.config;
    o.paxos.id = i;
    o.paxos.peers = config_addrs_;
    o.paxos.group = opts_.service;
    RealEnv& env = add_env("cfg" + std::to_string(i));
    env.spawn(run_config_server(env, o, initial));
  }
  for (size_t i = 0; i < replica_addrs_.size(); i++) {
    ReplicaOptions o = opts_.replica;
    o.self = replica_addrs_[i];
    o.config_servers = config_addrs_;
    o.service = opts_.service;
    RealEnv& env = add_env("r" + std::to_string(i));
    env.spawn(run_replica_server(env, o, opts_.factory));
  }
  RealEnv& env = add_env("bootstrap");
  env.spawn(bootstrap(env, initial, bootstrapped_));
}

RealEnv& LoopbackCluster::add_client(const std::string& name) { return add_env(name); }

void LoopbackCluster::shutdown() {
  for (auto it = envs_.rbegin(); it != envs_.rend(); ++it) (*it)->shutdown();
}

std::vector<std::string> LoopbackCluster::failures() const {
  std::vector<std::string> out;
  for (auto& e : envs_) {
    for (auto& f : e->failures()) out.push_back(std::string(e->name()) + ": " + f);
  }
  return out;
}

}  // namespace vrsm::real
