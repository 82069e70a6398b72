#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <boost/asio/io_context.hpp>
#include <csignal>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <optional>
#include <random>
#include <thread>

#include <unistd.h>

#include "vrsm/configservice/config_server.hpp"
#include "vrsm/kv/kv_clerk.hpp"
#include "vrsm/lincheck/checker.hpp"
#include "vrsm/lincheck/model.hpp"
#include "vrsm/real/real_env.hpp"
#include "vrsm/real/smoke.hpp"
#include "vrsm/reconfig/reconfig.hpp"
#include "vrsm/replica/replica_server.hpp"
#include "vrsm/sim/scenario.hpp"

using namespace vrsm;

namespace {

std::vector<Address> split_addresses(const std::string& csv) {
  std::vector<Address> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.emplace_back(item);
  }
  return out;
}

std::pair<uint64_t, uint64_t> parse_range(const std::string& s) {
  auto dots = s.find("..");
  if (dots == std::string::npos) {
    uint64_t v = std::stoull(s);
    return {v, v};
  }
  uint64_t a = std::stoull(s.substr(0, dots));
  uint64_t b = std::stoull(s.substr(dots + 2));
  if (b < a) throw std::invalid_argument("empty seed range " + s);
  return {a, b};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// --- sim ---

struct SimArgs {
  std::string scenario;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string history;
  std::string events;
  bool check = false;
  std::string seeds = "1..100";
  unsigned parallel = std::max(1u, std::thread::hardware_concurrency());
  std::string node;
  uint64_t max_points = 0;
};

int sim_run(const SimArgs& a) {
  auto sc = sim::load_scenario(a.scenario);
  if (a.seed_set) sc.seed = a.seed;
  sim::RunOptions ro;
  ro.check_linearizability = a.check;
  ro.keep_event_lines = !a.events.empty();
  auto rep = sim::run_scenario(sc, ro);
  if (!a.history.empty()) {
    std::ofstream(a.history) << history_to_jsonl(rep.history);
  }
  if (!a.events.empty()) {
    std::ofstream out(a.events);
    for (auto& l : rep.event_lines) out << l << "\n";
  }
  std::cout << rep.summary() << "\n";
  if (!rep.passed && rep.lincheck_ran && !rep.lincheck.ok) std::cout << rep.lincheck.describe() << "\n";
  return rep.passed ? 0 : 1;
}

int sim_sweep(const SimArgs& a) {
  auto sc = sim::load_scenario(a.scenario);
  auto [lo, hi] = parse_range(a.seeds);
  std::atomic<uint64_t> next{lo};
  std::mutex mu;
  uint64_t passed = 0, failed = 0;
  std::optional<uint64_t> first_fail;
  std::string first_reason;
  auto start = std::chrono::steady_clock::now();
  auto worker = [&] {
    while (true) {
      uint64_t seed = next++;
      if (seed > hi) return;
      sim::Scenario s = sc;
      s.seed = seed;
      sim::RunOptions ro;
      ro.check_linearizability = a.check;
      auto rep = sim::run_scenario(s, ro);
      std::lock_guard lk(mu);
      if (rep.passed) {
        passed++;
      } else {
        failed++;
        std::cout << "seed " << seed << " FAILED: " << rep.summary() << "\n";
        if (!first_fail || seed < *first_fail) {
          first_fail = seed;
          first_reason = rep.failures.empty() ? "" : rep.failures.front();
        }
      }
    }
  };
  std::vector<std::thread> threads;
  for (unsigned i = 0; i < std::max(1u, a.parallel); i++) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << fmt::format("{} passed, {} failed in {:.1f}s\n", passed, failed, secs);
  if (first_fail) {
    std::cout << fmt::format("first failing seed: {} ({})\nreproduce: vrsm sim run --scenario {} --seed {} --check\n",
                             *first_fail, first_reason, a.scenario, *first_fail);
  }
  return failed == 0 ? 0 : 1;
}

int sim_crash_sweep(const SimArgs& a) {
  auto sc = sim::load_scenario(a.scenario);
  if (a.seed_set) sc.seed = a.seed;
  auto rep = sim::crash_point_sweep(sc, a.node, a.max_points);
  std::cout << fmt::format("{}: {} crash points, {} violations\n", rep.node, rep.crash_points, rep.violations.size());
  for (auto& [point, why] : rep.violations) std::cout << fmt::format("  mutation {}: {}\n", point, why);
  return rep.violations.empty() ? 0 : 1;
}

int print_scenario(const SimArgs& a) {
  sim::Scenario sc = a.scenario.empty() ? sim::Scenario{} : sim::load_scenario(a.scenario);
  std::cout << sim::scenario_to_ini(sc);
  return 0;
}

// --- check ---

int check_history(const std::string& path, const std::string& model_name) {
  auto history = history_from_jsonl(read_file(path));
  auto model = model_by_name(model_name);
  auto res = check_linearizable(history, *model);
  if (res.ok) {
    std::cout << fmt::format("linearizable ({} operations, {} steps)\n", history.size(), res.steps);
    return 0;
  }
  std::cout << res.describe() << "\n";
  return 1;
}

// --- real ---

std::atomic<bool> g_stop{false};

// Runs the loop until SIGINT/SIGTERM or until `done` returns true.
void run_loop(boost::asio::io_context& io, const std::function<bool()>& done = nullptr) {
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  while (!g_stop && !(done && done())) io.run_for(std::chrono::milliseconds(50));
}

struct ServeArgs {
  std::string data = ".";
  std::string config;
  std::string initial;
  std::string listen;
  uint64_t id = 0;
  std::string app = "kv";
  int64_t epsilon_ms = 50;
};

int serve_paxos(const ServeArgs& a) {
  boost::asio::io_context io;
  real::RealEnvOptions eo;
  eo.name = "paxos" + std::to_string(a.id);
  eo.data_dir = a.data;
  eo.epsilon = std::chrono::milliseconds(a.epsilon_ms);
  real::RealEnv env(io, eo);
  ConfigServerOptions o;
  o.paxos.id = a.id;
  o.paxos.peers = split_addresses(a.config);
  o.paxos.group = 1;
  if (a.id >= o.paxos.peers.size()) throw std::invalid_argument("--id is not an index into --config");
  env.spawn(run_config_server(env, o, split_addresses(a.initial)));
  std::cerr << "serving paxos " << a.id << " on " << o.paxos.peers[a.id] << "\n";
  run_loop(io, [&] { return !env.failures().empty(); });
  return env.failures().empty() ? 0 : 1;
}

int serve_replica(const ServeArgs& a) {
  if (a.app != "kv") throw std::invalid_argument("only the kv application can be served");
  boost::asio::io_context io;
  real::RealEnvOptions eo;
  eo.name = "replica";
  eo.data_dir = a.data;
  eo.epsilon = std::chrono::milliseconds(a.epsilon_ms);
  real::RealEnv env(io, eo);
  ReplicaOptions o;
  o.self = Address(a.listen);
  o.config_servers = split_addresses(a.config);
  o.service = 1;
  env.spawn(run_replica_server(env, o, kv_state_machine()));
  std::cerr << "serving replica on " << a.listen << "\n";
  run_loop(io, [&] { return !env.failures().empty(); });
  return env.failures().empty() ? 0 : 1;
}

// Runs one coroutine that produces an Err on a fresh client node.
int run_client_task(const std::string& name, const std::function<Task<void>(Env&, Err&, bool&)>& body) {
  boost::asio::io_context io;
  real::RealEnvOptions eo;
  eo.name = name;
  eo.data_dir = std::filesystem::temp_directory_path() / ("vrsm-" + name + "-" + std::to_string(::getpid()));
  real::RealEnv env(io, eo);
  Err err = Err::kOk;
  bool done = false;
  env.spawn(body(env, err, done));
  run_loop(io, [&] { return done || !env.failures().empty(); });
  std::filesystem::remove_all(eo.data_dir);
  if (!done) return 1;
  std::cout << err_name(err) << "\n";
  return err == Err::kOk ? 0 : 1;
}

Task<void> do_init(Env& env, std::vector<Address> servers, Err& err, bool& done) {
  err = co_await initialize_replicas(env, servers, std::chrono::seconds(30));
  done = true;
}

Task<void> do_reconfigure(Env& env, std::vector<Address> config, std::vector<Address> servers, Err& err,
                          bool& done) {
  ConfigClerk cc(env, config);
  for (int attempt = 0; attempt < 20; attempt++) {
    err = co_await reconfigure(env, cc, servers);
    if (err == Err::kOk) break;
    co_await env.sleep(std::chrono::milliseconds(200));
  }
  done = true;
}

Task<void> do_kv(Env& env, std::vector<Address> config, std::string op, std::string key, std::string value,
                 std::string expect, Err& err, bool& done) {
  KvClerk kv(env, config);
  if (op == "get") {
    std::cout << co_await kv.get(key) << "\n";
  } else if (op == "put") {
    co_await kv.put(key, value);
  } else {
    std::cout << co_await kv.cond_put(key, expect, value) << "\n";
  }
  err = Err::kOk;
  done = true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primary/backup replicated state machines with Paxos-managed configuration"};
  app.require_subcommand(1);

  SimArgs sa;
  auto* sim = app.add_subcommand("sim", "Deterministic simulation");
  sim->require_subcommand(1);
  auto* run = sim->add_subcommand("run", "Run one scenario");
  run->add_option("--scenario", sa.scenario, "Scenario INI file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", sa.seed, "Override the scenario seed")->each([&](const std::string&) { sa.seed_set = true; });
  run->add_option("--history", sa.history, "Write the client history as JSON lines");
  run->add_option("--events", sa.events, "Write the event log");
  run->add_flag("--check", sa.check, "Check linearizability of the history");
  auto* sweep = sim->add_subcommand("sweep", "Run a range of seeds");
  sweep->add_option("--scenario", sa.scenario, "Scenario INI file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seeds", sa.seeds, "Seed range A..B")->capture_default_str();
  sweep->add_option("--parallel", sa.parallel, "Worker threads")->capture_default_str();
  sweep->add_flag("--check", sa.check, "Check linearizability of every history");
  auto* crash = sim->add_subcommand("crash-sweep", "Crash a node at every disk mutation");
  crash->add_option("--scenario", sa.scenario, "Scenario INI file")->required()->check(CLI::ExistingFile);
  crash->add_option("--node", sa.node, "Node name, e.g. r0 or cfg1")->required();
  crash->add_option("--seed", sa.seed, "Override the scenario seed")->each([&](const std::string&) { sa.seed_set = true; });
  crash->add_option("--max-points", sa.max_points, "Limit the crash points tried (0 = all)");
  auto* show = sim->add_subcommand("show", "Print a scenario with defaults filled in");
  show->add_option("--scenario", sa.scenario, "Scenario INI file (omit for defaults)")->check(CLI::ExistingFile);

  std::string hist_path, model = "kv";
  auto* check = app.add_subcommand("check", "Check a history file for linearizability");
  check->add_option("--history", hist_path, "JSON lines history")->required()->check(CLI::ExistingFile);
  check->add_option("--spec", model, "Model: kv, counter or cache")->capture_default_str();

  ServeArgs va;
  auto* sp = app.add_subcommand("serve-paxos", "Run a configuration (Paxos) server");
  sp->add_option("--id", va.id, "Index of this server in --config")->required();
  sp->add_option("--config", va.config, "Comma-separated host:port of all configuration servers")->required();
  sp->add_option("--initial", va.initial, "Comma-separated replicas of the first epoch")->required();
  sp->add_option("--data", va.data, "Data directory")->required();
  sp->add_option("--epsilon-ms", va.epsilon_ms, "Clock uncertainty bound")->capture_default_str();
  auto* sr = app.add_subcommand("serve-replica", "Run a replica server");
  sr->add_option("--listen", va.listen, "host:port to serve on")->required();
  sr->add_option("--config", va.config, "Comma-separated configuration servers")->required();
  sr->add_option("--data", va.data, "Data directory")->required();
  sr->add_option("--app", va.app, "Replicated application")->capture_default_str();
  sr->add_option("--epsilon-ms", va.epsilon_ms, "Clock uncertainty bound")->capture_default_str();

  std::string config, servers;
  bool init = false;
  auto* rc = app.add_subcommand("reconfigure", "Move the service to a new set of replicas");
  rc->add_option("--config", config, "Comma-separated configuration servers");
  rc->add_option("--servers", servers, "Comma-separated new replicas; the first becomes primary")->required();
  rc->add_flag("--init", init, "Initialize fresh replicas into the first epoch instead");

  std::string kv_op, key, value, expect;
  auto* kv = app.add_subcommand("kv", "One key-value operation");
  kv->add_option("op", kv_op, "get, put or cond-put")->required()->check(CLI::IsMember({"get", "put", "cond-put"}));
  kv->add_option("key", key)->required();
  kv->add_option("value", value);
  kv->add_option("--expect", expect, "Expected value for cond-put");
  kv->add_option("--config", config, "Comma-separated configuration servers")->required();

  real::SmokeOptions bo;
  bo.total_ops = 10000;
  std::string bench_data;
  bool bench_check = false;
  int64_t bench_reconfig_after = 3000;
  auto* bench = app.add_subcommand("bench", "KV workload over TCP; starts a loopback deployment unless --config is given");
  bench->add_option("--config", config, "Comma-separated configuration servers of a running deployment");
  bench->add_option("--ops", bo.total_ops, "Total operations")->capture_default_str();
  bench->add_option("--clients", bo.clients, "Concurrent clients")->capture_default_str();
  bench->add_option("--read-fraction", bo.read_fraction, "Fraction of gets")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  bench->add_option("--keys", bo.key_space, "Key space")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--replicas", bo.replicas, "Loopback replicas")->capture_default_str();
  bench->add_option("--reconfig-after", bench_reconfig_after, "Reconfigure the loopback deployment after this many ops (0 = never)")->capture_default_str();
  bench->add_option("--data", bench_data, "Data directory for loopback nodes (default: a temporary directory)");
  bench->add_flag("--check", bench_check, "Check linearizability of the recorded history");
  bench->add_option("--history", hist_path, "Write the client history as JSON lines");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return sim_run(sa);
    if (sweep->parsed()) return sim_sweep(sa);
    if (crash->parsed()) return sim_crash_sweep(sa);
    if (show->parsed()) return print_scenario(sa);
    if (check->parsed()) return check_history(hist_path, model);
    if (sp->parsed()) return serve_paxos(va);
    if (sr->parsed()) return serve_replica(va);
    if (rc->parsed()) {
      auto next = split_addresses(servers);
      if (init) return run_client_task("init", [&](Env& env, Err& e, bool& d) { return do_init(env, next, e, d); });
      if (config.empty()) throw std::invalid_argument("--config is required without --init");
      auto cfg = split_addresses(config);
      return run_client_task("reconfigure", [&](Env& env, Err& e, bool& d) { return do_reconfigure(env, cfg, next, e, d); });
    }
    if (kv->parsed()) {
      auto cfg = split_addresses(config);
      std::string op = kv_op == "cond-put" ? "cond_put" : kv_op;
      return run_client_task("kv", [&](Env& env, Err& e, bool& d) { return do_kv(env, cfg, op, key, value, expect, e, d); });
    }
    if (bench->parsed()) {
      bo.external_config = split_addresses(config);
      if (!bo.external_config.empty()) {
        bo.key_prefix = fmt::format("b{:x}.", std::chrono::system_clock::now().time_since_epoch().count());
        // Client ids come from the seed; a fixed one would collide with earlier runs.
        bo.seed = (static_cast<uint64_t>(std::random_device()()) << 32) | std::random_device()();
      }
      bo.check = bench_check;
      bo.reconfig_after_ops = static_cast<size_t>(std::max<int64_t>(0, bench_reconfig_after));
      bool temp = bench_data.empty();
      bo.data_dir = temp ? std::filesystem::temp_directory_path() / ("vrsm-bench-" + std::to_string(::getpid()))
                         : std::filesystem::path(bench_data);
      auto rep = real::run_loopback_smoke(bo);
      if (temp) std::filesystem::remove_all(bo.data_dir);
      if (!hist_path.empty()) std::ofstream(hist_path) << history_to_jsonl(rep.history);
      std::cout << rep.summary() << "\n";
      return rep.passed ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
