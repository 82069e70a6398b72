#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "vrsm/clock/clock.hpp"
#include "vrsm/runtime/env.hpp"
#include "vrsm/transport/fault_profile.hpp"

namespace vrsm::sim {

using NodeId = int32_t;
constexpr NodeId kNoNode = -1;
using NodeProgram = std::function<Task<void>(Env&)>;

class Simulator;
class SimNode;

// Rolling digest of everything that happened in a run. Two runs with the same
// seed and scenario produce identical digests.
class EventLog {
 public:
  void record(TimeNs t, std::string_view kind, int64_t node, uint64_t a = 0, uint64_t b = 0);
  uint64_t hash() const { return hash_; }
  uint64_t count() const { return count_; }
  void keep_lines(bool keep) { keep_ = keep; }
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  void mix(uint64_t v);

  uint64_t hash_ = 1469598103934665603ull;
  uint64_t count_ = 0;
  bool keep_ = false;
  std::vector<std::string> lines_;
};

// A node's disk. Lives outside the node so it survives crashes.
class SimDisk {
 public:
  struct Latency {
    Nanos read_min = std::chrono::microseconds(50);
    Nanos read_max = std::chrono::microseconds(200);
    Nanos write_min = std::chrono::microseconds(500);
    Nanos write_max = std::chrono::milliseconds(2);
  };

  std::map<std::string, Bytes>& files() { return files_; }
  const std::map<std::string, Bytes>& files() const { return files_; }

  // Counts store mutations; the hook may schedule a crash that lands while the
  // mutation is still in flight.
  uint64_t mutations() const { return mutations_; }
  void set_mutation_hook(std::function<void(uint64_t)> hook) { hook_ = std::move(hook); }
  Latency& latency() { return latency_; }

  uint64_t begin_write(const std::string& name, Bytes data, bool atomic);
  void finish_write(uint64_t id);
  // Applies crash semantics to writes that never completed.
  void tear_in_flight(std::mt19937_64& rng);
  size_t in_flight() const { return inflight_.size(); }

 private:
  struct Inflight {
    std::string name;
    Bytes data;
    bool atomic;
  };
  std::map<std::string, Bytes> files_;
  std::map<uint64_t, Inflight> inflight_;
  uint64_t next_id_ = 1;
  uint64_t mutations_ = 0;
  std::function<void(uint64_t)> hook_;
  Latency latency_;
};

class SimNetwork;

class SimNode final : public Env {
 public:
  SimNode(Simulator& sim, NodeId id, std::string name, NodeProgram program, ClockConfig clock);
  ~SimNode() override;

  TimeRange time_range() override;
  TimeNs monotonic_now() override;
  void post(std::coroutine_handle<> h) override;
  void call_after(Nanos delay, std::function<void()> fn) override;
  std::shared_ptr<Connection> connect(const Address& addr) override;
  std::shared_ptr<Listener> listen(const Address& addr) override;
  DurableStore& store() override;
  std::mt19937_64& rng() override { return rng_; }
  Observer& observer() override;
  std::string_view name() const override { return name_; }

  NodeId id() const { return id_; }
  bool up() const { return up_; }
  uint64_t incarnation() const { return incarnation_; }
  SimDisk& disk() { return disk_; }
  ClockModel& clock() { return clock_; }
  Simulator& simulator() { return sim_; }
  void set_observer(std::unique_ptr<Observer> obs) { observer_ = std::move(obs); }
  void set_program(NodeProgram p) { program_ = std::move(p); }

  bool accepting() const { return up_ && !tearing_down(); }

 private:
  friend class Simulator;
  void boot();
  void crash();

  void schedule_start(std::coroutine_handle<> h) override { post(h); }
  void report_failure(std::exception_ptr e) override;

  Simulator& sim_;
  NodeId id_;
  std::string name_;
  NodeProgram program_;
  ClockModel clock_;
  bool up_ = false;
  uint64_t incarnation_ = 0;
  std::mt19937_64 rng_;
  SimDisk disk_;
  std::unique_ptr<DurableStore> store_;
  std::unique_ptr<Observer> observer_;
};

class Simulator {
 public:
  explicit Simulator(uint64_t seed);
  ~Simulator();
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  NodeId add_node(std::string name, NodeProgram program, ClockConfig clock = {});
  SimNode& node(NodeId id) { return *nodes_.at(static_cast<size_t>(id)); }
  size_t node_count() const { return nodes_.size(); }

  void start(NodeId id);
  void crash(NodeId id);
  void restart(NodeId id);
  bool is_up(NodeId id) const { return nodes_.at(static_cast<size_t>(id))->up(); }

  // Global events run regardless of node state.
  void at(TimeNs t, std::function<void()> fn);
  void after(Nanos d, std::function<void()> fn) { at(now_ + to_ns(d), std::move(fn)); }
  // Node events are discarded if the node crashed after they were scheduled.
  void schedule_node(NodeId id, uint64_t incarnation, TimeNs t, std::function<void()> fn);

  // Runs until `stop` holds (checked between events), the queue drains or the
  // next event lies beyond `limit`. Returns true if `stop` became true.
  bool run(TimeNs limit, const std::function<bool()>& stop = {});
  bool step();

  TimeNs now() const { return now_; }
  uint64_t seed() const { return seed_; }
  std::mt19937_64& rng() { return rng_; }
  SimNetwork& network() { return *network_; }
  EventLog& log() { return log_; }
  uint64_t events_run() const { return events_run_; }

  void set_observer_factory(std::function<std::unique_ptr<Observer>(NodeId)> f);

  void record_failure(std::string msg) { failures_.push_back(std::move(msg)); }
  const std::vector<std::string>& failures() const { return failures_; }

 private:
  struct Event {
    TimeNs time;
    uint64_t key;
    uint64_t seq;
    NodeId node;
    uint64_t incarnation;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      if (a.key != b.key) return a.key > b.key;
      return a.seq > b.seq;
    }
  };
  void push(TimeNs t, NodeId node, uint64_t incarnation, std::function<void()> fn);

  uint64_t seed_;
  std::mt19937_64 rng_;
  TimeNs now_ = 0;
  uint64_t seq_ = 0;
  uint64_t events_run_ = 0;
  EventLog log_;
  std::vector<std::string> failures_;
  std::function<std::unique_ptr<Observer>(NodeId)> observer_factory_;
  std::unique_ptr<SimNetwork> network_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::vector<std::unique_ptr<SimNode>> nodes_;
};

uint64_t mix64(uint64_t x);

}  // namespace vrsm::sim
