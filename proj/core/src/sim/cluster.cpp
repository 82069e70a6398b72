#include "vrsm/sim/cluster.hpp"

#include "vrsm/kv/kv_clerk.hpp"
#include "vrsm/reconfig/reconfig.hpp"

namespace vrsm::sim {
namespace {

Task<void> bootstrap(Env& env, std::vector<Address> servers, std::shared_ptr<bool> done) {
  while (!*done) {
    Err err = co_await initialize_replicas(env, servers, std::chrono::seconds(30));
    if (err == Err::kOk) *done = true;
  }
}

}  // namespace

Cluster::Cluster(Simulator& sim, ClusterOptions opts) : sim_(sim), opts_(std::move(opts)) {
  if (!opts_.factory) opts_.factory = kv_state_machine();
  for (size_t i = 0; i < opts_.config_servers; i++) config_addrs_.emplace_back(opts_.prefix + "cfg" + std::to_string(i));
  for (size_t i = 0; i < opts_.replicas + opts_.spare_replicas; i++) {
    replica_addrs_.emplace_back(opts_.prefix + "r" + std::to_string(i));
  }
  auto initial = initial_config();

  for (size_t i = 0; i < config_addrs_.size(); i++) {
    ConfigServerOptions o = opts_.config;
    o.paxos.id = i;
    o.paxos.peers = config_addrs_;
    o.paxos.group = opts_.service;
    config_nodes_.push_back(sim_.add_node(
        config_addrs_[i].str(), [o, initial](Env& env) { return run_config_server(env, o, initial); },
        random_clock()));
  }
  for (size_t i = 0; i < replica_addrs_.size(); i++) {
    ReplicaOptions o = opts_.replica;
    o.self = replica_addrs_[i];
    o.config_servers = config_addrs_;
    o.service = opts_.service;
    VsmFactory f = opts_.factory;
    replica_nodes_.push_back(sim_.add_node(
        replica_addrs_[i].str(), [o, f](Env& env) { return run_replica_server(env, o, f); }, random_clock()));
  }
  auto done = bootstrapped_;
  bootstrap_node_ = sim_.add_node(
      opts_.prefix + "bootstrap",
      [initial, done](Env& env) { return bootstrap(env, initial, done); },
      random_clock());
}

ClockConfig Cluster::random_clock() {
  ClockConfig c;
  c.epsilon = opts_.epsilon;
  int64_t eps = to_ns(opts_.epsilon);
  c.offset_ns = eps == 0 ? 0 : std::uniform_int_distribution<int64_t>(-eps, eps)(sim_.rng());
  return c;
}

std::vector<Address> Cluster::initial_config() const {
  return {replica_addrs_.begin(), replica_addrs_.begin() + static_cast<ptrdiff_t>(opts_.replicas)};
}

void Cluster::start() {
  for (NodeId n : config_nodes_) sim_.start(n);
  for (NodeId n : replica_nodes_) sim_.start(n);
  sim_.start(bootstrap_node_);
}

NodeId Cluster::add_client(std::string name, NodeProgram program) {
  return sim_.add_node(std::move(name), std::move(program), random_clock());
}

NodeId Cluster::node_of(const Address& a) const {
  for (size_t i = 0; i < config_addrs_.size(); i++) {
    if (config_addrs_[i] == a) return config_nodes_[i];
  }
  for (size_t i = 0; i < replica_addrs_.size(); i++) {
    if (replica_addrs_[i] == a) return replica_nodes_[i];
  }
  return kNoNode;
}

}  // namespace vrsm::sim
