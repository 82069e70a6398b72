#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <boost/asio/io_context.hpp>

#include "vrsm/real/loopback.hpp"
#include "vrsm/real/real_env.hpp"
#include "vrsm/real/smoke.hpp"
#include "vrsm/rpc/rpc.hpp"

using namespace vrsm;
using namespace vrsm::real;
using namespace std::chrono_literals;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("vrsm-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path path;
};

template <class T>
T run_sync(boost::asio::io_context& io, Env& env, Task<T> (*f)(Env&, void*), void* arg) {
  std::optional<T> out;
  struct Box {
    static Task<void> go(Task<T> t, std::optional<T>* out) { out->emplace(co_await std::move(t)); }
  };
  env.spawn(Box::go(f(env, arg), &out));
  for (int i = 0; i < 500 && !out; i++) io.run_for(10ms);
  if (!out) throw std::runtime_error("timed out");
  return *out;
}

Task<Bytes> store_roundtrip(Env& env, void*) {
  auto& s = env.store();
  Bytes out;
  out += (co_await s.read("missing")) ? "present;" : "absent;";
  co_await s.append("log", "ab");
  co_await s.append("log", "cd");
  out += *(co_await s.read("log")) + ";";
  co_await s.write_atomic("state", "one");
  co_await s.write_atomic("state", "two");
  out += *(co_await s.read("state"));
  co_return out;
}

struct Call {
  Address addr;
  Nanos timeout;
};

Task<Bytes> call_echo(Env& env, void* arg) {
  auto* c = static_cast<Call*>(arg);
  RpcClient client(env, c->addr);
  auto r1 = co_await client.call(1, "hi", c->timeout);
  if (!r1) co_return "timeout";
  auto r2 = co_await client.call(1, "again", c->timeout);
  co_return *r1 + "," + r2.value_or("timeout");
}

}  // namespace

TEST(SplitHostPortTest, Parses) {
  EXPECT_EQ(split_host_port("127.0.0.1:80"), (std::pair<std::string, uint16_t>{"127.0.0.1", 80}));
  EXPECT_EQ(split_host_port("localhost:65535"), (std::pair<std::string, uint16_t>{"localhost", 65535}));
  EXPECT_THROW(split_host_port("nohost"), std::invalid_argument);
  EXPECT_THROW(split_host_port("h:70000"), std::invalid_argument);
  EXPECT_THROW(split_host_port("h:x"), std::invalid_argument);
}

TEST(FileStoreTest, AppendAndAtomicWrite) {
  TempDir dir;
  boost::asio::io_context io;
  RealEnv env(io, RealEnvOptions{"n", dir.path, 50ms, 1});
  EXPECT_EQ(run_sync<Bytes>(io, env, store_roundtrip, nullptr), "absent;abcd;two");
  EXPECT_EQ(fs::file_size(dir.path / "log"), 4u);
  EXPECT_FALSE(fs::exists(dir.path / "state.tmp"));
  env.shutdown();
}

TEST(RealEnvTest, TimeRangeBracketsSystemClock) {
  TempDir dir;
  boost::asio::io_context io;
  RealEnv env(io, RealEnvOptions{"n", dir.path, 50ms, 1});
  auto before = std::chrono::system_clock::now().time_since_epoch();
  TimeRange r = env.time_range();
  auto after = std::chrono::system_clock::now().time_since_epoch();
  EXPECT_LE(r.earliest, static_cast<TimeNs>(to_ns(after)));
  EXPECT_GE(r.latest, static_cast<TimeNs>(to_ns(before)));
  EXPECT_EQ(r.latest - r.earliest, static_cast<TimeNs>(to_ns(100ms)));
}

TEST(RealEnvTest, RpcOverTcp) {
  TempDir dir;
  boost::asio::io_context io;
  RealEnv server(io, RealEnvOptions{"server", dir.path / "s", 50ms, 1});
  RealEnv client(io, RealEnvOptions{"client", dir.path / "c", 50ms, 2});
  Address addr("127.0.0.1:" + std::to_string(pick_free_ports(1)[0]));
  HandlerTable t;
  t[1] = [](Bytes args) -> Task<Bytes> { co_return args + "!"; };
  serve_rpc(server, addr, std::move(t));
  Call c{addr, 5s};
  EXPECT_EQ(run_sync<Bytes>(io, client, call_echo, &c), "hi!,again!");
  server.shutdown();
  client.shutdown();
  EXPECT_TRUE(server.failures().empty());
}

TEST(RealEnvTest, CallToClosedPortTimesOut) {
  TempDir dir;
  boost::asio::io_context io;
  RealEnv client(io, RealEnvOptions{"client", dir.path, 50ms, 2});
  Call c{Address("127.0.0.1:" + std::to_string(pick_free_ports(1)[0])), 300ms};
  EXPECT_EQ(run_sync<Bytes>(io, client, call_echo, &c), "timeout");
  client.shutdown();
}

TEST(LoopbackTest, SmallSmokeWithReconfiguration) {
  TempDir dir;
  SmokeOptions o;
  o.data_dir = dir.path;
  o.clients = 4;
  o.total_ops = 800;
  o.reconfig_after_ops = 300;
  o.time_limit = 60s;
  SmokeReport r = run_loopback_smoke(o);
  EXPECT_TRUE(r.passed) << r.summary();
  EXPECT_TRUE(r.reconfigured);
  EXPECT_EQ(r.completed_ops, 800u);
  EXPECT_EQ(r.client_errors, 0u);
  EXPECT_TRUE(r.lincheck_ran);
}
