#include "vrsm/real/smoke.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <map>
#include <memory>

#include "vrsm/kv/kv_clerk.hpp"
#include "vrsm/lincheck/model.hpp"
#include "vrsm/real/loopback.hpp"
#include "vrsm/reconfig/reconfig.hpp"

namespace vrsm::real {
namespace {

TimeNs steady_ns() {
  return static_cast<TimeNs>(
      std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch()).count());
}

struct Shared {
  HistoryRecorder rec{steady_ns};
  size_t issued = 0;
  size_t clients_done = 0;
  uint64_t slow_ops = 0;
  double read_ns = 0;
  uint64_t reads = 0;
  double write_ns = 0;
  uint64_t writes = 0;
  std::vector<double> latencies;
  bool reconfig_done = false;
  size_t ops_at_reconfig = 0;
  std::vector<Address> final_config;
};

Task<void> client(Env& env, std::vector<Address> cfg, uint64_t id, SmokeOptions o, std::shared_ptr<Shared> sh) {
  KvClerk kv(env, cfg);
  std::map<std::string, std::string> seen;
  uint64_t i = 0;
  while (sh->issued < o.total_ops) {
    sh->issued++;
    std::string key = o.key_prefix + "k" + std::to_string(env.random_between(0, o.key_space - 1));
    std::string value = fmt::format("c{}.{}", id, i++);
    TimeNs t0 = steady_ns();
    bool read = std::uniform_real_distribution<double>(0, 1)(env.rng()) < o.read_fraction;
    if (read) {
      size_t h = sh->rec.invoke(id, "get", {key});
      Bytes v = co_await kv.get(key);
      sh->rec.complete(h, v);
      seen[key] = v;
    } else if (env.random_between(0, 1) == 0) {
      size_t h = sh->rec.invoke(id, "put", {key, value});
      co_await kv.put(key, value);
      sh->rec.complete(h, "");
    } else {
      std::string expect = seen[key];
      size_t h = sh->rec.invoke(id, "cond_put", {key, expect, value});
      Bytes r = co_await kv.cond_put(key, expect, value);
      sh->rec.complete(h, r);
    }
    auto took = static_cast<double>(steady_ns() - t0);
    if (took > static_cast<double>(to_ns(o.op_timeout))) sh->slow_ops++;
    sh->latencies.push_back(took);
    if (read) {
      sh->read_ns += took;
      sh->reads++;
    } else {
      sh->write_ns += took;
      sh->writes++;
    }
  }
  sh->clients_done++;
}

Task<void> controller(Env& env, std::vector<Address> cfg, std::vector<Address> next, size_t after,
                      std::shared_ptr<Shared> sh) {
  while (sh->rec.completed() < after) co_await env.sleep(std::chrono::milliseconds(5));
  ConfigClerk cc(env, cfg);
  Nanos backoff = std::chrono::milliseconds(100);
  while (true) {
    Err err = co_await reconfigure(env, cc, next);
    if (err == Err::kOk) break;
    co_await env.sleep(backoff);
    backoff = std::min<Nanos>(backoff * 2, std::chrono::seconds(2));
  }
  sh->final_config = next;
  sh->reconfig_done = true;
  sh->ops_at_reconfig = sh->rec.completed();
}

}  // namespace

std::string SmokeReport::summary() const {
  std::string s = fmt::format(
      "{} ops in {:.1f}s, {} client errors, mean read {:.0f}us, mean write {:.0f}us", completed_ops, wall_seconds,
      client_errors, mean_read_latency_us, mean_write_latency_us);
  if (reconfigured) s += fmt::format(", reconfigured at {} ops", ops_at_reconfig);
  s += fmt::format(", {:.0f} ops/s, p50 {:.0f}us, p99 {:.0f}us", ops_per_second, p50_latency_us, p99_latency_us);
  if (lincheck_ran) s += lincheck.ok ? ", linearizable" : ", NOT linearizable";
  for (auto& f : failures) s += "; " + f;
  return s;
}

SmokeReport run_loopback_smoke(const SmokeOptions& o) {
  SmokeReport rep;
  auto sh = std::make_shared<Shared>();
  TimeNs start = steady_ns();
  {
    boost::asio::io_context io;
    std::unique_ptr<LoopbackCluster> cluster;
    std::vector<std::unique_ptr<RealEnv>> own_envs;
    std::vector<Address> cfg = o.external_config;
    auto add_env = [&](const std::string& name) -> RealEnv& {
      if (cluster) return cluster->add_client(name);
      RealEnvOptions eo;
      eo.name = name;
      eo.data_dir = o.data_dir / name;
      own_envs.push_back(std::make_unique<RealEnv>(io, eo));
      return *own_envs.back();
    };
    if (cfg.empty()) {
      LoopbackOptions lo;
      lo.data_dir = o.data_dir;
      lo.config_servers = o.config_servers;
      lo.replicas = o.replicas;
      lo.spare_replicas = o.spare_replicas;
      cluster = std::make_unique<LoopbackCluster>(io, lo);
      cluster->start();
      cfg = cluster->config_addresses();
    }
    auto failures = [&] {
      std::vector<std::string> out;
      if (cluster) out = cluster->failures();
      for (auto& e : own_envs) {
        for (auto& f : e->failures()) out.push_back(std::string(e->name()) + ": " + f);
      }
      return out;
    };

    for (size_t c = 0; c < o.clients; c++) {
      RealEnv& env = add_env("client" + std::to_string(c));
      env.rng().seed(o.seed * 1000 + c);
      env.spawn(client(env, cfg, c, o, sh));
    }
    bool want_reconfig = cluster && o.reconfig_after_ops > 0 && o.reconfig_after_ops < o.total_ops &&
                         o.spare_replicas > 0;
    if (want_reconfig) {
      // Drop the first primary and bring in the first spare.
      auto all = cluster->replica_addresses();
      std::vector<Address> next(all.begin() + 1, all.begin() + static_cast<ptrdiff_t>(o.replicas + 1));
      RealEnv& env = add_env("controller");
      env.spawn(controller(env, cfg, next, o.reconfig_after_ops, sh));
    }

    TimeNs deadline = start + static_cast<TimeNs>(to_ns(o.time_limit));
    while (steady_ns() < deadline) {
      io.run_for(std::chrono::milliseconds(20));
      bool done = sh->clients_done == o.clients && (!want_reconfig || sh->reconfig_done);
      if (done) break;
      if (!failures().empty()) break;
    }
    for (auto& f : failures()) rep.failures.push_back("task failed: " + f);
    if (sh->clients_done != o.clients) rep.failures.push_back("clients did not finish before the time limit");
    if (want_reconfig && !sh->reconfig_done) rep.failures.push_back("reconfiguration did not finish");
    for (auto& e : own_envs) e->shutdown();
    if (cluster) cluster->shutdown();
  }
  rep.wall_seconds = static_cast<double>(steady_ns() - start) / 1e9;
  rep.history = sh->rec.snapshot();
  rep.completed_ops = sh->rec.completed();
  rep.client_errors = sh->slow_ops + (rep.history.size() - rep.completed_ops);
  rep.reconfigured = sh->reconfig_done;
  rep.ops_at_reconfig = sh->ops_at_reconfig;
  rep.final_config = to_strings(sh->final_config);
  if (sh->reads) rep.mean_read_latency_us = sh->read_ns / static_cast<double>(sh->reads) / 1e3;
  if (sh->writes) rep.mean_write_latency_us = sh->write_ns / static_cast<double>(sh->writes) / 1e3;
  if (rep.wall_seconds > 0) rep.ops_per_second = static_cast<double>(rep.completed_ops) / rep.wall_seconds;
  if (!sh->latencies.empty()) {
    auto& l = sh->latencies;
    auto pct = [&](double q) {
      auto k = static_cast<size_t>(q * static_cast<double>(l.size() - 1));
      std::nth_element(l.begin(), l.begin() + static_cast<ptrdiff_t>(k), l.end());
      return l[k] / 1e3;
    };
    rep.p50_latency_us = pct(0.5);
    rep.p99_latency_us = pct(0.99);
  }
  if (rep.client_errors > 0) rep.failures.push_back(fmt::format("{} client-visible errors", rep.client_errors));
  if (o.check) {
    rep.lincheck_ran = true;
    try {
      rep.lincheck = check_linearizable(rep.history, *kv_model());
      if (!rep.lincheck.ok) rep.failures.push_back("history is not linearizable: " + rep.lincheck.describe());
    } catch (const ResourceLimitError& e) {
      rep.failures.push_back(std::string("linearizability check gave up: ") + e.what());
    }
  }
  rep.passed = rep.failures.empty();
  return rep;
}

}  // namespace vrsm::real
