#include "vrsm/sim/simulator.hpp"

#include <fmt/format.h>

#include <cassert>

#include "vrsm/sim/network.hpp"
#include "vrsm/runtime/sync.hpp"

namespace vrsm::sim {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void EventLog::mix(uint64_t v) {
  for (int i = 0; i < 8; i++) {
    hash_ ^= (v >> (8 * i)) & 0xff;
    hash_ *= 1099511628211ull;
  }
}

void EventLog::record(TimeNs t, std::string_view kind, int64_t node, uint64_t a, uint64_t b) {
  count_++;
  mix(t);
  for (char c : kind) mix(static_cast<uint8_t>(c));
  mix(static_cast<uint64_t>(node));
  mix(a);
  mix(b);
  if (keep_) lines_.push_back(fmt::format("{} {} node={} {} {}", t, kind, node, a, b));
}

uint64_t SimDisk::begin_write(const std::string& name, Bytes data, bool atomic) {
  uint64_t id = next_id_++;
  inflight_.emplace(id, Inflight{name, std::move(data), atomic});
  mutations_++;
  if (hook_) hook_(mutations_);
  return id;
}

void SimDisk::finish_write(uint64_t id) {
  auto it = inflight_.find(id);
  if (it == inflight_.end()) return;
  auto& w = it->second;
  if (w.atomic) {
    files_[w.name] = std::move(w.data);
  } else {
    files_[w.name].append(w.data);
  }
  inflight_.erase(it);
}

void SimDisk::tear_in_flight(std::mt19937_64& rng) {
  for (auto& [id, w] : inflight_) {
    if (w.atomic) {
      if (rng() & 1) files_[w.name] = std::move(w.data);
    } else {
      size_t keep = std::uniform_int_distribution<size_t>(0, w.data.size())(rng);
      files_[w.name].append(w.data, 0, keep);
    }
  }
  inflight_.clear();
}

namespace {

class NoopObserver final : public Observer {};

NoopObserver& noop_observer() {
  static NoopObserver obs;
  return obs;
}

class SimStore final : public DurableStore {
 public:
  explicit SimStore(SimNode& node) : node_(node) {}

  Task<std::optional<Bytes>> read(std::string name) override {
    auto& lat = node_.disk().latency();
    co_await node_.sleep(node_.random_duration(lat.read_min, lat.read_max));
    auto& files = node_.disk().files();
    auto it = files.find(name);
    if (it == files.end()) co_return std::nullopt;
    co_return std::optional<Bytes>(it->second);
  }

  Task<void> append(std::string name, Bytes data) override {
    co_await write(std::move(name), std::move(data), false);
  }

  Task<void> write_atomic(std::string name, Bytes data) override {
    co_await write(std::move(name), std::move(data), true);
  }

 private:
  Task<void> write(std::string name, Bytes data, bool atomic) {
    auto& disk = node_.disk();
    size_t len = data.size();
    uint64_t id = disk.begin_write(name, std::move(data), atomic);
    node_.simulator().log().record(node_.simulator().now(), atomic ? "disk-write" : "disk-append", node_.id(), len);
    auto& lat = disk.latency();
    co_await node_.sleep(node_.random_duration(lat.write_min, lat.write_max));
    disk.finish_write(id);
  }

  SimNode& node_;
};

class SimClientConnection final : public Connection,
                                  public SimEndpoint,
                                  public std::enable_shared_from_this<SimClientConnection> {
 public:
  SimClientConnection(SimNode& node, Address peer) : node_(node), peer_(std::move(peer)), inbox_(node) {}
  ~SimClientConnection() override {
    if (ep_) node_.simulator().network().remove_endpoint(ep_);
  }

  void attach() { ep_ = node_.simulator().network().add_endpoint(node_.id(), weak_from_this()); }

  void send(Bytes msg) override {
    if (closed_ || !node_.accepting()) return;
    node_.simulator().network().send_to_address(node_.id(), ep_, peer_, std::move(msg));
  }
  Task<std::optional<Bytes>> receive() override { return inbox_.pop(); }
  void close() override {
    closed_ = true;
    inbox_.close();
  }
  const Address& peer() const override { return peer_; }
  void deliver(uint64_t, NodeId, Bytes msg) override {
    if (!closed_) inbox_.push(std::move(msg));
  }

 private:
  SimNode& node_;
  Address peer_;
  uint64_t ep_ = 0;
  bool closed_ = false;
  AsyncQueue<Bytes> inbox_;
};

class SimReplyConnection final : public Connection {
 public:
  SimReplyConnection(SimNode& node, uint64_t from_ep, uint64_t to_ep, Address peer)
      : node_(node), from_ep_(from_ep), to_ep_(to_ep), peer_(std::move(peer)) {}

  void send(Bytes msg) override {
    if (!node_.accepting()) return;
    node_.simulator().network().send_to_endpoint(node_.id(), from_ep_, to_ep_, std::move(msg));
  }
  Task<std::optional<Bytes>> receive() override { co_return std::nullopt; }
  void close() override {}
  const Address& peer() const override { return peer_; }

 private:
  SimNode& node_;
  uint64_t from_ep_;
  uint64_t to_ep_;
  Address peer_;
};

class SimListener final : public Listener, public SimEndpoint, public std::enable_shared_from_this<SimListener> {
 public:
  explicit SimListener(SimNode& node) : node_(node), inbox_(node) {}
  ~SimListener() override {
    if (ep_) node_.simulator().network().remove_endpoint(ep_);
  }

  bool attach(const Address& addr) {
    ep_ = node_.simulator().network().add_endpoint(node_.id(), weak_from_this());
    return node_.simulator().network().bind(addr, ep_);
  }

  Task<std::optional<Incoming>> receive() override { return inbox_.pop(); }
  void close() override { inbox_.close(); }
  void deliver(uint64_t from_ep, NodeId from_node, Bytes msg) override {
    auto reply = std::make_shared<SimReplyConnection>(node_, ep_, from_ep,
                                                      Address(std::to_string(from_node)));
    inbox_.push(Incoming{std::move(msg), std::move(reply)});
  }

 private:
  SimNode& node_;
  uint64_t ep_ = 0;
  AsyncQueue<Incoming> inbox_;
};

}  // namespace

SimNode::SimNode(Simulator& sim, NodeId id, std::string name, NodeProgram program, ClockConfig clock)
    : sim_(sim), id_(id), name_(std::move(name)), program_(std::move(program)), clock_(clock) {
  store_ = std::make_unique<SimStore>(*this);
}

SimNode::~SimNode() {
  up_ = false;
  destroy_all_tasks();
}

TimeRange SimNode::time_range() { return clock_.range_at(sim_.now()); }
TimeNs SimNode::monotonic_now() { return sim_.now(); }

void SimNode::post(std::coroutine_handle<> h) {
  if (!accepting()) return;
  sim_.schedule_node(id_, incarnation_, sim_.now(), [h] { h.resume(); });
}

void SimNode::call_after(Nanos delay, std::function<void()> fn) {
  if (!accepting()) return;
  sim_.schedule_node(id_, incarnation_, sim_.now() + to_ns(delay), std::move(fn));
}

std::shared_ptr<Connection> SimNode::connect(const Address& addr) {
  auto c = std::make_shared<SimClientConnection>(*this, addr);
  c->attach();
  return c;
}

std::shared_ptr<Listener> SimNode::listen(const Address& addr) {
  auto l = std::make_shared<SimListener>(*this);
  if (!l->attach(addr)) throw std::runtime_error("address already bound: " + addr.str());
  return l;
}

DurableStore& SimNode::store() { return *store_; }

Observer& SimNode::observer() { return observer_ ? *observer_ : noop_observer(); }

void SimNode::report_failure(std::exception_ptr e) {
  std::string what = "unknown exception";
  try {
    std::rethrow_exception(e);
  } catch (const std::exception& ex) {
    what = ex.what();
  } catch (...) {
  }
  sim_.record_failure(fmt::format("node {} task failed: {}", name_, what));
}

void SimNode::boot() {
  up_ = true;
  rng_.seed(mix64(sim_.seed() ^ mix64(static_cast<uint64_t>(id_) * 1315423911ull + incarnation_)));
  spawn(program_(*this));
}

void SimNode::crash() {
  up_ = false;
  incarnation_++;
  destroy_all_tasks();
  sim_.network().unbind_node(id_);
  disk_.tear_in_flight(sim_.rng());
}

Simulator::Simulator(uint64_t seed) : seed_(seed), rng_(mix64(seed)) {
  network_ = std::make_unique<SimNetwork>(*this);
}

Simulator::~Simulator() {
  // Tear down node heaps while the network is still alive.
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)->crash();
  nodes_.clear();
}

NodeId Simulator::add_node(std::string name, NodeProgram program, ClockConfig clock) {
  auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::make_unique<SimNode>(*this, id, std::move(name), std::move(program), clock));
  if (observer_factory_) nodes_.back()->set_observer(observer_factory_(id));
  return id;
}

void Simulator::set_observer_factory(std::function<std::unique_ptr<Observer>(NodeId)> f) {
  observer_factory_ = std::move(f);
  for (auto& n : nodes_) n->set_observer(observer_factory_ ? observer_factory_(n->id()) : nullptr);
}

void Simulator::start(NodeId id) {
  auto& n = node(id);
  if (n.up()) return;
  log_.record(now_, "start", id);
  n.boot();
}

void Simulator::crash(NodeId id) {
  auto& n = node(id);
  if (!n.up()) return;
  log_.record(now_, "crash", id);
  n.crash();
}

void Simulator::restart(NodeId id) {
  auto& n = node(id);
  if (n.up()) return;
  log_.record(now_, "restart", id);
  n.boot();
}

void Simulator::push(TimeNs t, NodeId node, uint64_t incarnation, std::function<void()> fn) {
  uint64_t s = seq_++;
  queue_.push(Event{t, mix64(s ^ seed_), s, node, incarnation, std::move(fn)});
}

void Simulator::at(TimeNs t, std::function<void()> fn) { push(std::max(t, now_), kNoNode, 0, std::move(fn)); }

void Simulator::schedule_node(NodeId id, uint64_t incarnation, TimeNs t, std::function<void()> fn) {
  push(std::max(t, now_), id, incarnation, std::move(fn));
}

bool Simulator::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the function is moved out before pop.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.time;
  if (ev.node != kNoNode) {
    auto& n = node(ev.node);
    if (!n.up() || n.incarnation() != ev.incarnation) return true;
  }
  events_run_++;
  ev.fn();
  return true;
}

bool Simulator::run(TimeNs limit, const std::function<bool()>& stop) {
  while (!queue_.empty()) {
    if (stop && stop()) return true;
    if (queue_.top().time > limit) break;
    step();
  }
  if (stop && stop()) return true;
  if (now_ < limit && queue_.empty()) now_ = limit;
  return false;
}

void SimNetwork::sever(NodeId a, NodeId b) {
  severed_.insert({a, b});
  severed_.insert({b, a});
}

void SimNetwork::repair(NodeId a, NodeId b) {
  severed_.erase({a, b});
  severed_.erase({b, a});
}

void SimNetwork::isolate(NodeId node) {
  for (size_t i = 0; i < sim_.node_count(); i++) {
    if (static_cast<NodeId>(i) != node) sever(node, static_cast<NodeId>(i));
  }
}

bool SimNetwork::link_up(NodeId a, NodeId b) const { return !severed_.count({a, b}); }

uint64_t SimNetwork::add_endpoint(NodeId node, std::weak_ptr<SimEndpoint> ep) {
  uint64_t id = next_endpoint_++;
  endpoints_.emplace(id, Endpoint{node, sim_.node(node).incarnation(), std::move(ep)});
  return id;
}

void SimNetwork::remove_endpoint(uint64_t id) {
  endpoints_.erase(id);
  for (auto it = bound_.begin(); it != bound_.end();) {
    if (it->second == id) {
      it = bound_.erase(it);
    } else {
      ++it;
    }
  }
}

bool SimNetwork::bind(const Address& addr, uint64_t endpoint) {
  auto it = bound_.find(addr.str());
  if (it != bound_.end() && endpoints_.count(it->second)) return false;
  bound_[addr.str()] = endpoint;
  owner_[addr.str()] = endpoints_.at(endpoint).node;
  return true;
}

void SimNetwork::unbind_node(NodeId node) {
  for (auto it = bound_.begin(); it != bound_.end();) {
    auto ep = endpoints_.find(it->second);
    if (ep == endpoints_.end() || ep->second.node == node) {
      it = bound_.erase(it);
    } else {
      ++it;
    }
  }
  for (auto it = endpoints_.begin(); it != endpoints_.end();) {
    if (it->second.node == node) {
      it = endpoints_.erase(it);
    } else {
      ++it;
    }
  }
}

void SimNetwork::send_to_address(NodeId from, uint64_t from_ep, const Address& to, Bytes msg) {
  auto it = owner_.find(to.str());
  NodeId to_node = it == owner_.end() ? kNoNode : it->second;
  transmit(from, from_ep, to_node, &to.str(), 0, std::move(msg));
}

void SimNetwork::send_to_endpoint(NodeId from, uint64_t from_ep, uint64_t to_ep, Bytes msg) {
  auto it = endpoints_.find(to_ep);
  NodeId to_node = it == endpoints_.end() ? kNoNode : it->second.node;
  transmit(from, from_ep, to_node, nullptr, to_ep, std::move(msg));
}

void SimNetwork::transmit(NodeId from, uint64_t from_ep, NodeId to_node, const std::string* to_addr, uint64_t to_ep,
                          Bytes msg) {
  stats_.sent++;
  auto& rng = sim_.rng();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (to_node == kNoNode || !link_up(from, to_node) || coin(rng) < faults_.drop) {
    stats_.dropped++;
    sim_.log().record(sim_.now(), "drop", from, static_cast<uint64_t>(to_node), msg.size());
    return;
  }
  int copies = coin(rng) < faults_.duplicate ? 2 : 1;
  if (copies == 2) stats_.duplicated++;
  auto shared = std::make_shared<Bytes>(std::move(msg));
  std::string addr = to_addr ? *to_addr : std::string();
  for (int i = 0; i < copies; i++) {
    TimeNs delay = std::uniform_int_distribution<TimeNs>(to_ns(faults_.min_delay),
                                                         std::max(to_ns(faults_.min_delay), to_ns(faults_.max_delay)))(rng);
    TimeNs at = sim_.now() + delay;
    if (faults_.min_delay >= faults_.max_delay) {
      auto& last = last_fixed_delivery_[{from, to_node}];
      at = std::max(at, last + 1);
      last = at;
    }
    sim_.at(at, [this, from, from_ep, addr, to_ep, shared] {
      uint64_t target = to_ep;
      if (!addr.empty()) {
        auto b = bound_.find(addr);
        target = b == bound_.end() ? 0 : b->second;
      }
      deliver(from, from_ep, target, *shared);
    });
  }
}

void SimNetwork::deliver(NodeId from, uint64_t from_ep, uint64_t to_ep, const Bytes& msg) {
  auto it = endpoints_.find(to_ep);
  if (it == endpoints_.end()) {
    stats_.dropped++;
    sim_.log().record(sim_.now(), "lost", from, to_ep, msg.size());
    return;
  }
  auto& node = sim_.node(it->second.node);
  auto ep = it->second.ep.lock();
  if (!ep || !node.accepting() || node.incarnation() != it->second.incarnation) {
    stats_.dropped++;
    sim_.log().record(sim_.now(), "lost", from, to_ep, msg.size());
    return;
  }
  stats_.delivered++;
  sim_.log().record(sim_.now(), "deliver", from, to_ep, msg.size());
  ep->deliver(from_ep, from, msg);
}

}  // namespace vrsm::sim
