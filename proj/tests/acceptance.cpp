// One test per acceptance criterion. Each records a single PASS/FAIL line;
// the lines are printed together when the binary exits.
#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include <fmt/core.h>

#include "support/brute_force.hpp"
#include "vrsm/lincheck/checker.hpp"
#include "vrsm/lincheck/model.hpp"
#include "vrsm/real/smoke.hpp"
#include "vrsm/sim/scenario.hpp"

using namespace vrsm;
using namespace vrsm::sim;
using namespace std::chrono_literals;

namespace {

std::map<int, std::string>& lines() {
  static std::map<int, std::string> m;
  return m;
}

void record(int n, bool pass, const std::string& what) {
  lines()[n] = fmt::format("criterion {:2}: {}  {}", n, pass ? "PASS" : "FAIL", what);
  EXPECT_TRUE(pass) << lines()[n];
}

class Summary : public ::testing::Environment {
 public:
  void TearDown() override {
    fmt::print("\n==== acceptance ====\n");
    for (const auto& [n, l] : lines()) fmt::print("{}\n", l);
    fflush(stdout);
  }
};
[[maybe_unused]] auto* const summary = ::testing::AddGlobalTestEnvironment(new Summary);

Scenario load(const char* file) { return load_scenario(std::string(VRSM_SCENARIO_DIR) + "/" + file); }

// Totals over every simulated run in this process, for the lease criterion.
struct Totals {
  std::mutex mu;
  uint64_t runs = 0;
  uint64_t live_transitions = 0;
  uint64_t early_transitions = 0;
  uint64_t lease_reads = 0;
  uint64_t reads_outliving_epoch = 0;
} totals;

void account(const RunReport& r) {
  uint64_t early = 0;
  for (const auto& f : r.failures) {
    if (f.find("before the lease expiring") != std::string::npos) early++;
  }
  std::lock_guard<std::mutex> l(totals.mu);
  totals.runs++;
  totals.live_transitions += r.oracle.live_transitions;
  totals.early_transitions += early;
  totals.lease_reads += r.oracle.lease_reads;
  totals.reads_outliving_epoch += r.oracle.reads_outliving_epoch;
}

// Runs seeds [1, n] on all cores. Histories and event lines are dropped after
// checking to bound memory.
std::vector<RunReport> run_seeds(const Scenario& base, uint64_t n) {
  std::vector<RunReport> out(n);
  std::atomic<uint64_t> next{0};
  unsigned workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; w++) {
    pool.emplace_back([&] {
      for (uint64_t i = next++; i < n; i = next++) {
        Scenario sc = base;
        sc.seed = i + 1;
        RunReport r = run_scenario(sc);
        account(r);
        r.history.clear();
        out[i] = std::move(r);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

std::string first_failure(const std::vector<RunReport>& rs) {
  for (const auto& r : rs) {
    if (!r.passed) return fmt::format("; first failing seed {}: {}", r.seed, r.failures.empty() ? "" : r.failures[0]);
  }
  return "";
}

uint64_t count_passed(const std::vector<RunReport>& rs) {
  return static_cast<uint64_t>(std::count_if(rs.begin(), rs.end(), [](const RunReport& r) { return r.passed; }));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

TEST(Acceptance, C01_ChaosLinearizable) {
  auto t0 = std::chrono::steady_clock::now();
  auto rs = run_seeds(load("chaos.ini"), 500);
  double secs = seconds_since(t0);
  uint64_t passed = count_passed(rs);
  uint64_t weak = 0;
  for (const auto& r : rs) weak += r.crashes < 1 || r.reconfigurations < 1;
  record(1, passed == 500 && weak == 0 && secs <= 600,
         fmt::format("chaos: {}/500 seeds pass, {} without a crash and a reconfiguration, {:.1f}s (limit 600s){}", passed,
                     weak, secs, first_failure(rs)));
}

TEST(Acceptance, C02_ExactlyOnceCounter) {
  auto rs = run_seeds(load("counter.ini"), 200);
  uint64_t exact = 0;
  for (const auto& r : rs) exact += r.passed && r.final_counter == 400;
  record(2, exact == 200, fmt::format("counter: final value 400 in {}/200 seeds{}", exact, first_failure(rs)));
}

TEST(Acceptance, C04_ReconfigurationRace) {
  auto rs = run_seeds(load("reconfig_race.ini"), 100);
  uint64_t passed = count_passed(rs);
  uint64_t reconfigs = 0;
  for (const auto& r : rs) reconfigs += r.reconfigurations;
  record(4, passed == 100,
         fmt::format("reconfig race: {}/100 seeds pass with 2 controllers ({} reconfigurations){}", passed, reconfigs,
                     first_failure(rs)));
}

TEST(Acceptance, C05_CrashPointSweeps) {
  Scenario replica = load("crash_sweep.ini");
  Scenario paxos = load("paxos_sweep.ini");
  std::string detail;
  bool ok = true;
  auto sweep = [&](const Scenario& sc, const char* node, bool expect_clean, const char* label) {
    SweepReport s = crash_point_sweep(sc, node);
    bool good = expect_clean ? s.violations.empty() && s.crash_points > 0 : !s.violations.empty();
    ok = ok && good;
    detail += fmt::format("{}{} {}/{}", detail.empty() ? "" : ", ", label, s.violations.size(), s.crash_points);
    if (expect_clean && !s.violations.empty()) detail += fmt::format(" [{}]", s.violations.front().second);
  };
  sweep(replica, "r0", true, "primary r0");
  sweep(replica, "r1", true, "backup r1");
  sweep(replica, "cfg1", true, "config acceptor cfg1");
  sweep(paxos, "px1", true, "paxos acceptor px1");
  Scenario m1 = replica;
  m1.mutant_ack_before_sync = true;
  sweep(m1, "r0", false, "mutant log-ack-before-sync");
  Scenario m2 = replica;
  m2.mutant_backup_ack_before_durable = true;
  sweep(m2, "r1", false, "mutant backup-ack-before-durable");
  Scenario m3 = paxos;
  m3.mutant_paxos_ack_before_persist = true;
  sweep(m3, "px1", false, "mutant paxos-ack-before-persist");
  record(5, ok, "crash sweeps (violations/crash points): " + detail);
}

TEST(Acceptance, C06_PaxosAgreement) {
  auto r3 = run_seeds(load("paxos3.ini"), 1000);
  auto r5 = run_seeds(load("paxos5.ini"), 1000);
  uint64_t p3 = 0, p5 = 0;
  for (const auto& r : r3) p3 += r.passed && r.paxos_final_commit;
  for (const auto& r : r5) p5 += r.passed && r.paxos_final_commit;
  record(6, p3 == 1000 && p5 == 1000,
         fmt::format("paxos: 3 servers {}/1000, 5 servers {}/1000 agree and commit after healing{}{}", p3, p5,
                     first_failure(r3), first_failure(r5)));
}

TEST(Acceptance, C07_CheckerMatchesBruteForce) {
  std::mt19937_64 rng(20240601);
  auto model = kv_model();
  uint64_t agree = 0, rejected = 0;
  for (int i = 0; i < 10000; i++) {
    History h = vrsm::testing::random_kv_history(rng, 8);
    bool expected = vrsm::testing::brute_force_linearizable<vrsm::testing::MapSpec>(h);
    bool got = check_linearizable(h, *model).ok;
    agree += expected == got;
    rejected += !expected;
  }
  record(7, agree == 10000,
         fmt::format("lincheck vs brute force: {}/10000 agree ({} non-linearizable histories)", agree, rejected));
}

TEST(Acceptance, C08_BankConservation) {
  Scenario sc = load("bank.ini");
  auto rs = run_seeds(sc, 100);
  uint64_t total = sc.accounts * sc.initial_balance;
  uint64_t good = 0, audits = 0;
  for (const auto& r : rs) {
    bool all = r.passed && !r.audits.empty();
    for (uint64_t a : r.audits) all = all && a == total;
    audits += r.audits.size();
    good += all;
  }
  record(8, good == 100,
         fmt::format("bank: every audit equals {} in {}/100 seeds ({} audits){}", total, good, audits, first_failure(rs)));
}

TEST(Acceptance, C09_CacheConsistency) {
  Scenario sc = load("cache.ini");
  auto rs = run_seeds(sc, 100);
  uint64_t passed = count_passed(rs);
  uint64_t changes = 0;
  for (const auto& r : rs) changes += r.oracle.cache_value_changes;
  record(9, passed == 100 && sc.epsilon == 50ms,
         fmt::format("cache: {}/100 seeds pass lincheck and the lease monitor ({} value changes checked){}", passed,
                     changes, first_failure(rs)));
}

TEST(Acceptance, C10_PerKeyReadDependencies) {
  Scenario sc = load("reads.ini");
  const uint64_t n = 20;
  auto per_key = run_seeds(sc, n);
  sc.read_waits_for_next_index = true;
  auto whole_log = run_seeds(sc, n);
  double a = 0, b = 0;
  for (const auto& r : per_key) a += r.mean_read_latency_ms / n;
  for (const auto& r : whole_log) b += r.mean_read_latency_ms / n;
  uint64_t pa = count_passed(per_key), pb = count_passed(whole_log);
  record(10, pa == n && pb == n && a < b,
         fmt::format("reads: mean read latency {:.2f} ms per-key vs {:.2f} ms next-index over {} seeds; lincheck {}/{} "
                     "and {}/{}",
                     a, b, n, pa, n, pb, n));
}

TEST(Acceptance, C11_LoopbackSmoke) {
  real::SmokeOptions o;
  o.data_dir = std::filesystem::temp_directory_path() / fmt::format("vrsm-acceptance-{}", std::random_device{}());
  o.total_ops = 10000;
  o.read_fraction = 0.95;
  o.config_servers = 3;
  o.replicas = 3;
  real::SmokeReport r = real::run_loopback_smoke(o);
  std::filesystem::remove_all(o.data_dir);
  bool pass = r.passed && r.reconfigured && r.client_errors == 0 && r.completed_ops == 10000 && r.lincheck_ran &&
              r.lincheck.ok;
  record(11, pass,
         fmt::format("loopback: {} ops, {} client errors, reconfigured at op {}, lincheck {}, {:.1f}s", r.completed_ops,
                     r.client_errors, r.ops_at_reconfig, r.lincheck_ran && r.lincheck.ok ? "ok" : "FAILED",
                     r.wall_seconds));
}

// Last: the lease criterion covers every simulated run above.
TEST(Acceptance, C03_LeaseSafety) {
  auto rs = run_seeds(load("lease_pause.ini"), 100);
  uint64_t passed = count_passed(rs);
  std::lock_guard<std::mutex> l(totals.mu);
  record(3, totals.early_transitions == 0 && passed == 100,
         fmt::format("lease: {} early live-epoch transitions in {} runs ({} transitions); pause injection {}/100 pass; "
                     "{} of {} lease reads outlived their epoch{}",
                     totals.early_transitions, totals.runs, totals.live_transitions, passed,
                     totals.reads_outliving_epoch, totals.lease_reads, first_failure(rs)));
}
