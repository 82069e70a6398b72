#include "vrsm/sim/scenario.hpp"

#include <fmt/format.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vrsm/apps/bank.hpp"
#include "vrsm/apps/cachekv.hpp"
#include "vrsm/apps/lockservice.hpp"
#include "vrsm/configservice/config_clerk.hpp"
#include "vrsm/exactlyonce/exactlyonce.hpp"
#include "vrsm/kv/kv_clerk.hpp"
#include "vrsm/kv/kv_machine.hpp"
#include "vrsm/paxos/paxos.hpp"
#include "vrsm/reconfig/reconfig.hpp"
#include "vrsm/rpc/rpc.hpp"
#include "vrsm/sim/cluster.hpp"
#include "vrsm/sim/network.hpp"

namespace vrsm::sim {

namespace {

constexpr uint32_t kMainService = 1;
constexpr uint32_t kLockService = 2;

const std::map<std::string_view, Workload>& workload_names() {
  static const std::map<std::string_view, Workload> names = {
      {"kv", Workload::kKv},     {"counter", Workload::kCounter}, {"bank", Workload::kBank},
      {"cache", Workload::kCache}, {"lock", Workload::kLock},     {"paxos", Workload::kPaxos},
  };
  return names;
}

}  // namespace

std::string_view workload_name(Workload w) {
  for (const auto& [name, v] : workload_names()) {
    if (v == w) return name;
  }
  return "?";
}

Workload parse_workload(std::string_view name) {
  auto it = workload_names().find(name);
  if (it == workload_names().end()) throw std::invalid_argument(fmt::format("unknown workload '{}'", name));
  return it->second;
}

// Scenario files ----------------------------------------------------------------

namespace {

using Setter = std::function<void(Scenario&, const std::string&)>;
using Getter = std::function<std::string(const Scenario&)>;

struct Field {
  Setter set;
  Getter get;
};

uint64_t parse_u64(const std::string& v) {
  size_t used = 0;
  uint64_t x = std::stoull(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

double parse_double(const std::string& v) {
  size_t used = 0;
  double x = std::stod(v, &used);
  if (used != v.size()) throw std::invalid_argument("trailing characters");
  return x;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("expected true or false");
}

template <typename T>
Field u64_field(T Scenario::*m) {
  return {[m](Scenario& s, const std::string& v) { s.*m = static_cast<T>(parse_u64(v)); },
          [m](const Scenario& s) { return std::to_string(s.*m); }};
}

Field ms_field(Nanos Scenario::*m) {
  return {[m](Scenario& s, const std::string& v) { s.*m = std::chrono::milliseconds(parse_u64(v)); },
          [m](const Scenario& s) {
            return std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(s.*m).count());
          }};
}

Field ms_fault(Nanos FaultProfile::*m) {
  return {[m](Scenario& s, const std::string& v) { s.faults.*m = std::chrono::milliseconds(parse_u64(v)); },
          [m](const Scenario& s) {
            return std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(s.faults.*m).count());
          }};
}

Field prob_fault(double FaultProfile::*m) {
  return {[m](Scenario& s, const std::string& v) {
            double p = parse_double(v);
            if (p < 0 || p > 1) throw std::invalid_argument("probability outside [0, 1]");
            s.faults.*m = p;
          },
          [m](const Scenario& s) { return fmt::format("{}", s.faults.*m); }};
}

Field fraction_field(double Scenario::*m) {
  return {[m](Scenario& s, const std::string& v) {
            double p = parse_double(v);
            if (p < 0 || p > 1) throw std::invalid_argument("fraction outside [0, 1]");
            s.*m = p;
          },
          [m](const Scenario& s) { return fmt::format("{}", s.*m); }};
}

Field bool_field(bool Scenario::*m) {
  return {[m](Scenario& s, const std::string& v) { s.*m = parse_bool(v); },
          [m](const Scenario& s) { return std::string(s.*m ? "true" : "false"); }};
}

// Ordered as written by scenario_to_ini.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = {
      {"scenario.name", {[](Scenario& s, const std::string& v) { s.name = v; }, [](const Scenario& s) { return s.name; }}},
      {"scenario.workload",
       {[](Scenario& s, const std::string& v) { s.workload = parse_workload(v); },
        [](const Scenario& s) { return std::string(workload_name(s.workload)); }}},
      {"scenario.seed", u64_field(&Scenario::seed)},
      {"scenario.time_limit_ms", ms_field(&Scenario::time_limit)},
      {"cluster.config_servers", u64_field(&Scenario::config_servers)},
      {"cluster.replicas", u64_field(&Scenario::replicas)},
      {"cluster.spare_replicas", u64_field(&Scenario::spare_replicas)},
      {"cluster.epsilon_ms", ms_field(&Scenario::epsilon)},
      {"network.drop", prob_fault(&FaultProfile::drop)},
      {"network.duplicate", prob_fault(&FaultProfile::duplicate)},
      {"network.min_delay_ms", ms_fault(&FaultProfile::min_delay)},
      {"network.max_delay_ms", ms_fault(&FaultProfile::max_delay)},
      {"workload.clients", u64_field(&Scenario::clients)},
      {"workload.ops_per_client", u64_field(&Scenario::ops_per_client)},
      {"workload.read_fraction", fraction_field(&Scenario::read_fraction)},
      {"workload.key_space", u64_field(&Scenario::key_space)},
      {"workload.think_max_ms", ms_field(&Scenario::think_max)},
      {"workload.cache_time_ms", ms_field(&Scenario::cache_time)},
      {"workload.accounts", u64_field(&Scenario::accounts)},
      {"workload.initial_balance", u64_field(&Scenario::initial_balance)},
      {"faults.backup_crashes", u64_field(&Scenario::backup_crashes)},
      {"faults.config_crashes", u64_field(&Scenario::config_crashes)},
      {"faults.partitions", u64_field(&Scenario::partitions)},
      {"faults.window_start_ms", ms_field(&Scenario::fault_window_start)},
      {"faults.window_end_ms", ms_field(&Scenario::fault_window_end)},
      {"faults.restart_min_ms", ms_field(&Scenario::restart_min)},
      {"faults.restart_max_ms", ms_field(&Scenario::restart_max)},
      {"faults.partition_min_ms", ms_field(&Scenario::partition_min)},
      {"faults.partition_max_ms", ms_field(&Scenario::partition_max)},
      {"reconfig.controllers", u64_field(&Scenario::controllers)},
      {"reconfig.reconfigurations", u64_field(&Scenario::reconfigurations)},
      {"reconfig.window_start_ms", ms_field(&Scenario::reconfig_window_start)},
      {"reconfig.window_end_ms", ms_field(&Scenario::reconfig_window_end)},
      {"reconfig.heal_after_ms", ms_field(&Scenario::heal_after)},
      {"protocol.pause_after_lease_check_ms", ms_field(&Scenario::pause_after_lease_check)},
      {"protocol.pause_probability", fraction_field(&Scenario::pause_probability)},
      {"protocol.read_waits_for_next_index", bool_field(&Scenario::read_waits_for_next_index)},
      {"mutants.storage_ack_before_sync", bool_field(&Scenario::mutant_ack_before_sync)},
      {"mutants.backup_ack_before_durable", bool_field(&Scenario::mutant_backup_ack_before_durable)},
      {"mutants.paxos_ack_before_persist", bool_field(&Scenario::mutant_paxos_ack_before_persist)},
  };
  return f;
}

void validate(const Scenario& s) {
  if (s.config_servers == 0) throw std::invalid_argument("cluster.config_servers must be positive");
  if (s.workload != Workload::kPaxos && s.replicas == 0) throw std::invalid_argument("cluster.replicas must be positive");
  if (s.faults.min_delay > s.faults.max_delay) throw std::invalid_argument("network.min_delay_ms exceeds max_delay_ms");
  if (s.fault_window_start > s.fault_window_end) throw std::invalid_argument("faults window is empty");
  if (s.reconfig_window_start > s.reconfig_window_end) throw std::invalid_argument("reconfig window is empty");
  if (s.restart_min > s.restart_max || s.partition_min > s.partition_max) {
    throw std::invalid_argument("fault duration range is empty");
  }
  if (s.workload == Workload::kBank && s.accounts < 2) throw std::invalid_argument("bank needs two accounts");
  if (s.key_space == 0) throw std::invalid_argument("workload.key_space must be positive");
}

}  // namespace

Scenario parse_scenario(std::string_view ini) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(ini)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw std::invalid_argument(fmt::format("scenario line {}: {}", e.line(), e.message()));
  }
  std::map<std::string, const Field*> by_key;
  for (const auto& [k, f] : fields()) by_key[k] = &f;

  Scenario sc;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw std::invalid_argument(fmt::format("key '{}' outside a section", section));
    }
    for (const auto& [key, value] : body) {
      std::string full = section + "." + key;
      auto it = by_key.find(full);
      if (it == by_key.end()) throw std::invalid_argument(fmt::format("unknown scenario key '{}'", full));
      try {
        it->second->set(sc, value.data());
      } catch (const std::exception& e) {
        throw std::invalid_argument(fmt::format("scenario key '{}' = '{}': {}", full, value.data(), e.what()));
      }
    }
  }
  validate(sc);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument(fmt::format("cannot open scenario file {}", path));
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_to_ini(const Scenario& sc) {
  std::string out;
  std::string section;
  for (const auto& [key, f] : fields()) {
    auto dot = key.find('.');
    std::string sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += '\n';
      out += fmt::format("[{}]\n", sec);
      section = sec;
    }
    out += fmt::format("{} = {}\n", key.substr(dot + 1), f.get(sc));
  }
  return out;
}

// Workloads -----------------------------------------------------------------

namespace {

struct LockInterval {
  uint64_t owner = 0;
  TimeNs begin = 0;
  TimeNs end = 0;
};

struct RunState {
  explicit RunState(Simulator& sim) : rec([&sim] { return sim.now(); }) {}

  HistoryRecorder rec;
  size_t workers = 0;
  size_t workers_done = 0;
  size_t controllers = 0;
  size_t controllers_done = 0;
  bool setup_done = false;
  uint64_t reconfigs = 0;
  uint64_t heals = 0;
  bool final_read_done = false;
  uint64_t final_counter = 0;
  std::vector<uint64_t> audits;
  std::vector<LockInterval> lock_intervals;
  std::vector<std::string> failures;
  bool paxos_chaos_over = false;
  bool paxos_final_done = false;
  bool paxos_final_commit = false;

  bool workers_finished() const { return workers_done >= workers; }
};

using State = std::shared_ptr<RunState>;

double uniform01(Env& env) { return std::uniform_real_distribution<double>(0.0, 1.0)(env.rng()); }

Task<void> think(Env& env, Nanos max) {
  if (max > Nanos(0)) co_await env.sleep(env.random_duration(Nanos(0), max));
}

Task<void> wait_for_setup(Env& env, State st) {
  while (!st->setup_done) co_await env.sleep(std::chrono::milliseconds(20));
}

Task<void> kv_client(Env& env, std::vector<Address> cfg, uint64_t id, Scenario sc, State st) {
  KvClerk kv(env, cfg);
  std::map<std::string, std::string> seen;
  for (size_t i = 0; i < sc.ops_per_client; i++) {
    co_await think(env, sc.think_max);
    std::string key = "k" + std::to_string(env.random_between(0, sc.key_space - 1));
    std::string value = fmt::format("c{}.{}", id, i);
    if (uniform01(env) < sc.read_fraction) {
      size_t h = st->rec.invoke(id, "get", {key});
      Bytes v = co_await kv.get(key);
      st->rec.complete(h, v);
      seen[key] = v;
    } else if (env.random_between(0, 1) == 0) {
      size_t h = st->rec.invoke(id, "put", {key, value});
      co_await kv.put(key, value);
      st->rec.complete(h, "");
    } else {
      std::string expect = seen[key];
      size_t h = st->rec.invoke(id, "cond_put", {key, expect, value});
      Bytes r = co_await kv.cond_put(key, expect, value);
      st->rec.complete(h, r);
    }
  }
  st->workers_done++;
}

Task<void> counter_client(Env& env, std::vector<Address> cfg, uint64_t id, Scenario sc, State st) {
  EoClerk eo(env, cfg);
  Bytes inc = "inc";
  for (size_t i = 0; i < sc.ops_per_client; i++) {
    co_await think(env, sc.think_max);
    size_t h = st->rec.invoke(id, "inc", {});
    Bytes r = co_await eo.apply(inc);
    st->rec.complete(h, r);
  }
  st->workers_done++;
  if (id != 0) co_return;
  while (!st->workers_finished()) co_await env.sleep(std::chrono::milliseconds(50));
  Bytes get = "get";
  size_t h = st->rec.invoke(id, "get", {});
  Bytes r = co_await eo.read(get);
  st->rec.complete(h, r);
  st->final_counter = std::stoull(r);
  st->final_read_done = true;
}

std::vector<Bytes> account_names(size_t n) {
  std::vector<Bytes> out;
  for (size_t i = 0; i < n; i++) out.push_back("acct" + std::to_string(i));
  return out;
}

Task<void> bank_setup(Env& env, std::vector<Address> balances_cfg, Scenario sc, State st) {
  if (st->setup_done) co_return;
  KvClerk bal(env, balances_cfg);
  std::map<Bytes, uint64_t> initial;
  for (const auto& a : account_names(sc.accounts)) initial[a] = sc.initial_balance;
  for (const auto& [a, amount] : initial) {
    Bytes v = std::to_string(amount);
    co_await bal.put(a, v);
  }
  st->setup_done = true;
}

Task<void> bank_client(Env& env, std::vector<Address> balances_cfg, std::vector<Address> locks_cfg, uint64_t id,
                       Scenario sc, State st) {
  co_await wait_for_setup(env, st);
  KvClerk bal(env, balances_cfg);
  KvClerk lk(env, locks_cfg);
  LockClerk locks(env, lk);
  Bank bank(bal, locks, account_names(sc.accounts));
  for (size_t i = 0; i < sc.ops_per_client; i++) {
    co_await think(env, sc.think_max);
    uint64_t a = env.random_between(0, sc.accounts - 1);
    uint64_t b = env.random_between(0, sc.accounts - 2);
    if (b >= a) b++;
    Bytes src = "acct" + std::to_string(a);
    Bytes dst = "acct" + std::to_string(b);
    co_await bank.transfer(src, dst, env.random_between(1, sc.initial_balance / 2 + 1));
  }
  st->workers_done++;
}

Task<void> bank_auditor(Env& env, std::vector<Address> balances_cfg, std::vector<Address> locks_cfg, Scenario sc,
                        State st) {
  co_await wait_for_setup(env, st);
  KvClerk bal(env, balances_cfg);
  KvClerk lk(env, locks_cfg);
  LockClerk locks(env, lk);
  Bank bank(bal, locks, account_names(sc.accounts));
  // The auditor counts as a worker; it stops once the transfer clients do.
  while (st->workers_done + 1 < st->workers) {
    st->audits.push_back(co_await bank.audit());
    co_await think(env, sc.think_max * 5);
  }
  st->audits.push_back(co_await bank.audit());
  st->workers_done++;
}

Task<void> cache_client(Env& env, std::vector<Address> cfg, uint64_t id, Scenario sc, State st) {
  KvClerk kv(env, cfg);
  CacheKv cache(env, kv);
  std::string ms = std::to_string(std::chrono::duration_cast<std::chrono::milliseconds>(sc.cache_time).count());
  for (size_t i = 0; i < sc.ops_per_client; i++) {
    co_await think(env, sc.think_max);
    std::string key = "k" + std::to_string(env.random_between(0, sc.key_space - 1));
    std::string value = fmt::format("c{}.{}", id, i);
    uint64_t kind = env.random_between(0, 2);
    if (kind == 0) {
      size_t h = st->rec.invoke(id, "get", {key});
      Bytes v = co_await cache.get(key);
      st->rec.complete(h, v);
    } else if (kind == 1) {
      size_t h = st->rec.invoke(id, "put", {key, value});
      co_await cache.put(key, value);
      st->rec.complete(h, "");
    } else {
      size_t h = st->rec.invoke(id, "get_and_cache", {key, ms});
      Bytes v = co_await cache.get_and_cache(key, sc.cache_time);
      st->rec.complete(h, v);
    }
  }
  st->workers_done++;
}

Task<void> lock_client(Env& env, std::vector<Address> cfg, uint64_t id, Scenario sc, State st) {
  KvClerk kv(env, cfg);
  LockClerk locks(env, kv);
  for (size_t i = 0; i < sc.ops_per_client; i++) {
    LockedHandle h = co_await locks.acquire("lock");
    LockInterval iv;
    iv.owner = h.owner;
    iv.begin = env.monotonic_now();
    co_await think(env, sc.think_max);
    iv.end = env.monotonic_now();
    bool ok = co_await locks.release(h);
    if (!ok) st->failures.push_back(fmt::format("client {} could not release its lock", id));
    st->lock_intervals.push_back(iv);
    co_await think(env, sc.think_max);
  }
  st->workers_done++;
}

Task<void> paxos_member(Env& env, PaxosOptions o, uint64_t id, Scenario sc, State st) {
  Bytes initial = "init";
  auto node = co_await PaxosNode::recover(env, o, initial);
  HandlerTable table;
  node->register_handlers(table);
  serve_rpc(env, o.peers.at(o.id), std::move(table));
  while (!st->paxos_chaos_over) {
    co_await env.sleep(env.random_duration(std::chrono::milliseconds(20), std::chrono::milliseconds(300)));
    if (st->paxos_chaos_over) break;
    if (!node->is_leader()) {
      if (env.random_between(0, 1) == 0) co_await node->try_become_leader();
      continue;
    }
    Bytes blob = fmt::format("n{}.{}", id, env.random_u64());
    co_await node->commit(node->begin(), blob);
  }
  if (id == 0 && !st->paxos_final_done) {
    // Calls started during the chaos keep retransmitting until they time out;
    // wait them out so node 0 is the only one competing.
    co_await env.sleep(o.rpc_timeout * 2);
    // A leader flag from before the quiet period may be stale, so always run
    // a fresh election.
    for (int attempt = 0; attempt < 50; attempt++) {
      if (co_await node->try_become_leader()) break;
      co_await env.sleep(std::chrono::milliseconds(100));
    }
    if (node->is_leader()) {
      Bytes blob = "final";
      Err err = co_await node->commit(node->begin(), blob);
      st->paxos_final_commit = err == Err::kOk;
    }
    st->paxos_final_done = true;
  }
  co_await Env::park();
}

Task<void> controller(Env& env, std::vector<Address> config_servers, std::vector<Address> replicas, size_t size,
                      Scenario sc, State st) {
  ConfigClerk cc(env, config_servers);
  co_await env.sleep(env.random_duration(sc.reconfig_window_start, sc.reconfig_window_end));
  for (size_t r = 0; r < sc.reconfigurations; r++) {
    if (r > 0) co_await env.sleep(env.random_duration(Nanos(0), (sc.reconfig_window_end - sc.reconfig_window_start) / 2));
    // Racing controllers invalidate each other's reservations, so back off
    // exponentially with jitter or they can duel forever.
    Nanos backoff = std::chrono::milliseconds(100);
    for (;;) {
      std::vector<Address> next = replicas;
      std::shuffle(next.begin(), next.end(), env.rng());
      next.resize(std::min(size, next.size()));
      Err err = co_await reconfigure(env, cc, next);
      if (err == Err::kOk) break;
      co_await env.sleep(env.random_duration(backoff / 2, backoff));
      backoff = std::min<Nanos>(backoff * 2, std::chrono::seconds(10));
    }
    st->reconfigs++;
  }
  st->controllers_done++;
}

Task<void> healer(Env& env, std::vector<Address> config_servers, std::vector<Address> replicas, size_t size,
                  Scenario sc, State st) {
  ConfigClerk cc(env, config_servers);
  size_t last = 0;
  while (!st->workers_finished()) {
    co_await env.sleep(sc.heal_after);
    size_t now = st->rec.completed();
    if (now != last || st->workers_finished()) {
      last = now;
      continue;
    }
    std::vector<Address> next = replicas;
    std::shuffle(next.begin(), next.end(), env.rng());
    next.resize(std::min(size, next.size()));
    Err err = co_await reconfigure(env, cc, next);
    if (err == Err::kOk) st->heals++;
  }
}

ConfigServerOptions config_options(const Scenario& sc) {
  ConfigServerOptions o;
  o.paxos.ack_before_persist = sc.mutant_paxos_ack_before_persist;
  return o;
}

ReplicaOptions replica_options(const Scenario& sc) {
  ReplicaOptions o;
  o.storage.ack_before_sync = sc.mutant_ack_before_sync;
  o.backup_ack_before_durable = sc.mutant_backup_ack_before_durable;
  o.pause_after_lease_check = sc.pause_after_lease_check;
  o.pause_probability = sc.pause_probability;
  o.read_waits_for_next_index = sc.read_waits_for_next_index;
  return o;
}

// Fault plan --------------------------------------------------------------------

class Faults {
 public:
  Faults(Simulator& sim, const Scenario& sc, GlobalOracle& oracle) : sim_(sim), sc_(sc), oracle_(oracle) {}

  TimeNs random_time(Nanos lo, Nanos hi) {
    return std::uniform_int_distribution<TimeNs>(to_ns(lo), to_ns(hi))(sim_.rng());
  }
  Nanos random_span(Nanos lo, Nanos hi) { return Nanos(static_cast<int64_t>(random_time(lo, hi))); }

  void crash_later(NodeId n) {
    if (!sim_.is_up(n)) return;
    sim_.crash(n);
    crashes++;
    pending_restarts++;
    sim_.after(random_span(sc_.restart_min, sc_.restart_max), [this, n] {
      sim_.restart(n);
      pending_restarts--;
    });
  }

  void isolate_later(NodeId n) {
    sim_.network().isolate(n);
    pending_restarts++;
    sim_.after(random_span(sc_.partition_min, sc_.partition_max), [this, n] {
      for (size_t m = 0; m < sim_.node_count(); m++) sim_.network().repair(n, static_cast<NodeId>(m));
      pending_restarts--;
    });
  }

  // Crashes a non-primary server of the live configuration.
  void plan_backup_crashes(const Cluster& c, uint32_t service, size_t count) {
    for (size_t i = 0; i < count; i++) {
      sim_.at(random_time(sc_.fault_window_start, sc_.fault_window_end), [this, &c, service] {
        auto cfg = oracle_.live_config(service);
        if (cfg.size() < 2) return;
        size_t pick = std::uniform_int_distribution<size_t>(1, cfg.size() - 1)(sim_.rng());
        NodeId n = c.node_of(cfg[pick]);
        if (n != kNoNode) crash_later(n);
      });
    }
  }

  void plan_crashes(std::vector<NodeId> nodes, size_t count) {
    if (nodes.empty()) return;
    for (size_t i = 0; i < count; i++) {
      sim_.at(random_time(sc_.fault_window_start, sc_.fault_window_end), [this, nodes] {
        crash_later(nodes[std::uniform_int_distribution<size_t>(0, nodes.size() - 1)(sim_.rng())]);
      });
    }
  }

  void plan_partitions(std::vector<NodeId> nodes, size_t count) {
    if (nodes.empty()) return;
    for (size_t i = 0; i < count; i++) {
      sim_.at(random_time(sc_.fault_window_start, sc_.fault_window_end), [this, nodes] {
        isolate_later(nodes[std::uniform_int_distribution<size_t>(0, nodes.size() - 1)(sim_.rng())]);
      });
    }
  }

  uint64_t crashes = 0;
  int pending_restarts = 0;

 private:
  Simulator& sim_;
  const Scenario& sc_;
  GlobalOracle& oracle_;
};

ClusterOptions cluster_options(const Scenario& sc, std::string prefix, uint32_t service) {
  ClusterOptions o;
  o.prefix = std::move(prefix);
  o.service = service;
  o.config_servers = sc.config_servers;
  o.replicas = sc.replicas;
  o.spare_replicas = sc.spare_replicas;
  o.epsilon = sc.epsilon;
  o.config = config_options(sc);
  o.replica = replica_options(sc);
  return o;
}

std::vector<NodeId> concat(const std::vector<NodeId>& a, const std::vector<NodeId>& b) {
  std::vector<NodeId> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

void check_lock_intervals(std::vector<LockInterval> ivs, std::vector<std::string>& failures) {
  std::sort(ivs.begin(), ivs.end(), [](const LockInterval& a, const LockInterval& b) { return a.begin < b.begin; });
  for (size_t i = 1; i < ivs.size(); i++) {
    if (ivs[i].begin < ivs[i - 1].end) {
      failures.push_back(fmt::format("lock held by {} from t={} overlaps holder {} until t={}", ivs[i].owner,
                                     ivs[i].begin, ivs[i - 1].owner, ivs[i - 1].end));
      return;
    }
  }
}

}  // namespace

std::string RunReport::summary() const {
  std::string s = fmt::format("seed {}: {} ({} events, t={:.3f}s, {} ops, {} reconfigurations, {} crashes)", seed,
                              passed ? "PASS" : "FAIL", events, end_time / 1e9, completed_ops, reconfigurations,
                              crashes);
  if (heals > 0) s += fmt::format(" ({} healing reconfigurations)", heals);
  for (const auto& f : failures) s += "\n  " + f;
  return s;
}

RunReport run_scenario(const Scenario& sc, const RunOptions& opts) {
  Simulator sim(sc.seed);
  sim.log().keep_lines(opts.keep_event_lines);
  sim.network().set_faults(sc.faults);
  GlobalOracle oracle(sim);
  oracle.attach();
  auto st = std::make_shared<RunState>(sim);
  Faults faults(sim, sc, oracle);

  std::unique_ptr<Cluster> main;
  std::unique_ptr<Cluster> locks;
  std::vector<NodeId> workers;
  std::vector<NodeId> paxos_nodes;

  if (sc.workload == Workload::kPaxos) {
    std::vector<Address> peers;
    for (size_t i = 0; i < sc.config_servers; i++) peers.emplace_back("px" + std::to_string(i));
    oracle.add_paxos_group(kMainService, peers.size());
    for (size_t i = 0; i < peers.size(); i++) {
      PaxosOptions o;
      o.id = i;
      o.peers = peers;
      o.group = kMainService;
      o.ack_before_persist = sc.mutant_paxos_ack_before_persist;
      paxos_nodes.push_back(sim.add_node(
          peers[i].str(), [o, i, sc, st](Env& env) { return paxos_member(env, o, i, sc, st); }, ClockConfig{}));
    }
    for (NodeId n : paxos_nodes) sim.start(n);
    faults.plan_crashes(paxos_nodes, sc.config_crashes);
    faults.plan_partitions(paxos_nodes, sc.partitions);
    sim.at(to_ns(sc.fault_window_end) + 1, [&sim, st, paxos_nodes] {
      st->paxos_chaos_over = true;
      sim.network().heal_all();
      sim.network().set_faults(FaultProfile{});
      for (NodeId n : paxos_nodes) sim.restart(n);
    });
  } else {
    VsmFactory factory = sc.workload == Workload::kCounter
                             ? exactly_once([] { return std::make_unique<CounterMachine>(); })
                             : kv_state_machine();
    ClusterOptions co = cluster_options(sc, "", kMainService);
    co.factory = factory;
    main = std::make_unique<Cluster>(sim, co);
    oracle.add_service(kMainService, sc.config_servers, main->initial_config());
    oracle.set_shadow(kMainService, factory);
    if (sc.workload == Workload::kCache) oracle.watch_cache(kMainService);
    if (sc.workload == Workload::kLock) oracle.watch_locks(kMainService);
    main->start();

    if (sc.workload == Workload::kBank) {
      locks = std::make_unique<Cluster>(sim, cluster_options(sc, "lk.", kLockService));
      oracle.add_service(kLockService, sc.config_servers, locks->initial_config());
      oracle.set_shadow(kLockService, kv_state_machine());
      oracle.watch_locks(kLockService);
      locks->start();
    }

    auto cfg = main->config_addresses();
    for (uint64_t i = 0; i < sc.clients; i++) {
      std::string name = "client" + std::to_string(i);
      NodeProgram p;
      switch (sc.workload) {
        case Workload::kKv:
          p = [cfg, i, sc, st](Env& env) { return kv_client(env, cfg, i, sc, st); };
          break;
        case Workload::kCounter:
          p = [cfg, i, sc, st](Env& env) { return counter_client(env, cfg, i, sc, st); };
          break;
        case Workload::kCache:
          p = [cfg, i, sc, st](Env& env) { return cache_client(env, cfg, i, sc, st); };
          break;
        case Workload::kLock:
          p = [cfg, i, sc, st](Env& env) { return lock_client(env, cfg, i, sc, st); };
          break;
        case Workload::kBank: {
          auto lcfg = locks->config_addresses();
          p = [cfg, lcfg, i, sc, st](Env& env) { return bank_client(env, cfg, lcfg, i, sc, st); };
          break;
        }
        case Workload::kPaxos:
          break;
      }
      workers.push_back(main->add_client(name, std::move(p)));
    }
    if (sc.workload == Workload::kBank) {
      auto lcfg = locks->config_addresses();
      workers.push_back(main->add_client(
          "auditor", [cfg, lcfg, sc, st](Env& env) { return bank_auditor(env, cfg, lcfg, sc, st); }));
      NodeId setup = main->add_client("setup", [cfg, sc, st](Env& env) { return bank_setup(env, cfg, sc, st); });
      sim.start(setup);
    } else {
      st->setup_done = true;
    }
    st->workers = workers.size();
    for (NodeId n : workers) sim.start(n);

    auto replicas = main->replica_addresses();
    auto cfg_servers = main->config_addresses();
    for (size_t i = 0; i < sc.controllers; i++) {
      NodeId n = main->add_client("controller" + std::to_string(i), [cfg_servers, replicas, sc, st](Env& env) {
        return controller(env, cfg_servers, replicas, sc.replicas, sc, st);
      });
      sim.start(n);
    }
    st->controllers = sc.controllers;
    if (sc.heal_after > Nanos(0)) {
      NodeId n = main->add_client("healer", [cfg_servers, replicas, sc, st](Env& env) {
        return healer(env, cfg_servers, replicas, sc.replicas, sc, st);
      });
      sim.start(n);
    }

    faults.plan_backup_crashes(*main, kMainService, sc.backup_crashes);
    faults.plan_crashes(main->config_nodes(), sc.config_crashes);
    faults.plan_partitions(concat(main->config_nodes(), main->replica_nodes()), sc.partitions);
  }

  NodeId crash_target = kNoNode;
  if (!opts.crash_node.empty()) {
    for (size_t i = 0; i < sim.node_count(); i++) {
      if (sim.node(static_cast<NodeId>(i)).name() == opts.crash_node) crash_target = static_cast<NodeId>(i);
    }
    if (crash_target == kNoNode) throw std::invalid_argument(fmt::format("no node named {}", opts.crash_node));
    if (opts.crash_at_mutation > 0) {
      auto fired = std::make_shared<bool>(false);
      sim.node(crash_target).disk().set_mutation_hook([&sim, &faults, crash_target, fired, k = opts.crash_at_mutation](uint64_t m) {
        if (m != k || *fired) return;
        *fired = true;
        sim.after(Nanos(0), [&sim, &faults, crash_target] {
          if (!sim.is_up(crash_target)) return;
          sim.crash(crash_target);
          faults.crashes++;
          faults.pending_restarts++;
          sim.after(std::chrono::milliseconds(20), [&sim, &faults, crash_target] {
            sim.restart(crash_target);
            faults.pending_restarts--;
          });
        });
      });
    }
  }

  auto finished = [&] {
    if (!oracle.ok()) return true;
    if (sc.workload == Workload::kPaxos) return st->paxos_final_done;
    bool final_read = sc.workload != Workload::kCounter || st->final_read_done;
    return st->workers_finished() && st->controllers_done >= st->controllers && final_read &&
           faults.pending_restarts == 0;
  };
  TimeNs limit = to_ns(sc.time_limit);
  bool done = sim.run(limit, finished);
  // Let restarted nodes finish recovering so their checks run.
  if (done && oracle.ok()) sim.run(sim.now() + to_ns(std::chrono::milliseconds(500)));

  RunReport r;
  r.seed = sc.seed;
  r.end_time = sim.now();
  r.events = sim.events_run();
  r.event_hash = sim.log().hash();
  if (opts.keep_event_lines) r.event_lines = sim.log().lines();
  r.history = st->rec.snapshot();
  r.oracle = oracle.stats();
  r.first_violation_event = oracle.first_violation_event();
  r.reconfigurations = st->reconfigs;
  r.heals = st->heals;
  r.crashes = faults.crashes;
  r.final_counter = st->final_counter;
  r.audits = st->audits;
  r.lock_acquisitions = r.oracle.lock_acquisitions;
  r.paxos_final_commit = st->paxos_final_commit;
  if (crash_target != kNoNode) r.crash_node_mutations = sim.node(crash_target).disk().mutations();

  for (const auto& v : oracle.violations()) r.failures.push_back("oracle: " + v);
  for (const auto& f : sim.failures()) r.failures.push_back("node failure: " + f);
  for (const auto& f : st->failures) r.failures.push_back("workload: " + f);
  if (!done) {
    r.failures.push_back(fmt::format("workload unfinished at t={:.3f}s ({} of {} workers, {} of {} controllers)",
                                     sim.now() / 1e9, st->workers_done, st->workers, st->controllers_done,
                                     st->controllers));
  }

  double read_total = 0;
  uint64_t reads = 0;
  for (const auto& o : r.history) {
    if (!o.completed) continue;
    r.completed_ops++;
    if (o.op == "get") {
      read_total += static_cast<double>(o.ret - o.invoke);
      reads++;
    }
  }
  if (reads > 0) r.mean_read_latency_ms = read_total / reads / 1e6;

  switch (sc.workload) {
    case Workload::kCounter:
      if (done && st->final_counter != sc.clients * sc.ops_per_client) {
        r.failures.push_back(fmt::format("counter ended at {}, expected {}", st->final_counter,
                                         sc.clients * sc.ops_per_client));
      }
      break;
    case Workload::kBank: {
      uint64_t total = sc.accounts * sc.initial_balance;
      for (size_t i = 0; i < st->audits.size(); i++) {
        if (st->audits[i] != total) {
          r.failures.push_back(fmt::format("audit {} saw {}, expected {}", i, st->audits[i], total));
          break;
        }
      }
      break;
    }
    case Workload::kLock: {
      check_lock_intervals(st->lock_intervals, r.failures);
      if (done && r.lock_acquisitions != st->lock_intervals.size()) {
        r.failures.push_back(fmt::format("oracle saw {} acquisitions, clients made {}", r.lock_acquisitions,
                                         st->lock_intervals.size()));
      }
      break;
    }
    case Workload::kPaxos:
      if (done && !st->paxos_final_commit) r.failures.push_back("commit failed after the group healed");
      break;
    default:
      break;
  }

  if (opts.check_linearizability) {
    std::unique_ptr<Model> model;
    if (sc.workload == Workload::kKv) model = kv_model();
    if (sc.workload == Workload::kCounter) model = counter_model();
    if (sc.workload == Workload::kCache) model = cache_model();
    if (model) {
      r.lincheck_ran = true;
      try {
        r.lincheck = check_linearizable(r.history, *model, opts.lincheck);
        if (!r.lincheck.ok) r.failures.push_back(r.lincheck.describe());
      } catch (const ResourceLimitError& e) {
        r.lincheck.ok = false;
        r.failures.push_back(std::string("lincheck: ") + e.what());
      }
    }
  }
  r.passed = r.failures.empty();
  return r;
}

SweepReport crash_point_sweep(const Scenario& sc, const std::string& node, uint64_t max_points) {
  SweepReport report;
  report.node = node;
  RunOptions base;
  base.crash_node = node;
  base.check_linearizability = false;
  RunReport baseline = run_scenario(sc, base);
  uint64_t total = baseline.crash_node_mutations;
  std::vector<uint64_t> points;
  if (max_points == 0 || total <= max_points) {
    for (uint64_t k = 1; k <= total; k++) points.push_back(k);
  } else {
    for (uint64_t i = 0; i < max_points; i++) points.push_back(1 + i * total / max_points);
  }
  for (uint64_t k : points) {
    RunOptions o = base;
    o.crash_at_mutation = k;
    o.check_linearizability = true;
    RunReport r = run_scenario(sc, o);
    report.crash_points++;
    if (!r.passed) report.violations.emplace_back(k, r.failures.front());
  }
  return report;
}

}  // namespace vrsm::sim
