#include <gtest/gtest.h>

#include <memory>
#include <vector>

#include "vrsm/runtime/sync.hpp"
#include "vrsm/sim/simulator.hpp"

using namespace vrsm;
using namespace vrsm::sim;

namespace {

Task<int> add_later(Env& env, int a, int b) {
  co_await env.sleep(5_ms);
  co_return a + b;
}

Task<void> sum_program(Env& env, std::shared_ptr<std::vector<int>> out) {
  int v = co_await add_later(env, 1, 2);
  out->push_back(v);
  out->push_back(static_cast<int>(env.monotonic_now() / 1000000));
}

struct Alive {
  explicit Alive(std::shared_ptr<int> c) : count(std::move(c)) { ++*count; }
  ~Alive() { --*count; }
  std::shared_ptr<int> count;
};

Task<void> hold_forever(Env& env, std::shared_ptr<int> count) {
  Alive a(count);
  co_await env.sleep(1000_s);
}

Task<void> holder_program(Env& env, std::shared_ptr<int> count, std::shared_ptr<int> boots) {
  ++*boots;
  env.spawn(hold_forever(env, count));
  Alive a(count);
  co_await Env::park();
}

Task<void> waiter(Env& env, Notifier& n, Nanos timeout, std::shared_ptr<std::vector<int>> out, int tag) {
  bool notified = co_await n.wait(timeout);
  out->push_back(notified ? tag : -tag);
}

Task<void> notifier_program(Env& env, std::shared_ptr<std::vector<int>> out) {
  Notifier n(env);
  env.spawn(waiter(env, n, 10_ms, out, 1));
  env.spawn(waiter(env, n, 100_ms, out, 2));
  co_await env.sleep(50_ms);
  n.notify_all();
  co_await env.sleep(100_ms);
}

Task<void> locker(Env& env, AsyncMutex& m, std::shared_ptr<std::vector<int>> out, int tag) {
  auto g = co_await m.lock();
  out->push_back(tag);
  co_await env.sleep(1_ms);
  out->push_back(tag);
}

Task<void> mutex_program(Env& env, std::shared_ptr<std::vector<int>> out) {
  AsyncMutex m(env);
  for (int i = 0; i < 4; i++) env.spawn(locker(env, m, out, i));
  co_await env.sleep(1_s);
}

Task<void> throwing(Env& env) {
  co_await env.sleep(1_ms);
  throw std::runtime_error("boom");
}

}  // namespace

TEST(TaskTest, AwaitReturnsValueAfterSimulatedDelay) {
  Simulator sim(1);
  auto out = std::make_shared<std::vector<int>>();
  auto id = sim.add_node("n", [out](Env& env) { return sum_program(env, out); });
  sim.start(id);
  sim.run(1'000'000'000);
  ASSERT_EQ(out->size(), 2u);
  EXPECT_EQ((*out)[0], 3);
  EXPECT_EQ((*out)[1], 5);
}

TEST(TaskTest, CrashDestroysAllFramesAndRestartRerunsProgram) {
  Simulator sim(2);
  auto count = std::make_shared<int>(0);
  auto boots = std::make_shared<int>(0);
  auto id = sim.add_node("n", [count, boots](Env& env) { return holder_program(env, count, boots); });
  sim.start(id);
  sim.run(10'000'000);
  EXPECT_EQ(*count, 2);
  EXPECT_EQ(sim.node(id).live_tasks(), 2u);
  sim.crash(id);
  EXPECT_EQ(*count, 0);
  EXPECT_EQ(sim.node(id).live_tasks(), 0u);
  sim.restart(id);
  sim.run(20'000'000);
  EXPECT_EQ(*count, 2);
  EXPECT_EQ(*boots, 2);
}

TEST(TaskTest, TimersFromPreviousIncarnationNeverFire) {
  Simulator sim(3);
  auto fired = std::make_shared<int>(0);
  auto id = sim.add_node("n", [fired](Env& env) -> Task<void> {
    env.call_after(5_ms, [fired] { ++*fired; });
    return [](Env& e) -> Task<void> { co_await Env::park(); }(env);
  });
  sim.start(id);
  sim.crash(id);
  sim.restart(id);
  sim.run(100'000'000);
  // Only the second incarnation's timer fires.
  EXPECT_EQ(*fired, 1);
}

TEST(SyncTest, NotifierWakesWaitersOrTimesOut) {
  Simulator sim(4);
  auto out = std::make_shared<std::vector<int>>();
  auto id = sim.add_node("n", [out](Env& env) { return notifier_program(env, out); });
  sim.start(id);
  sim.run(1'000'000'000);
  EXPECT_EQ(*out, (std::vector<int>{-1, 2}));
}

TEST(SyncTest, MutexSerializesCriticalSections) {
  Simulator sim(5);
  auto out = std::make_shared<std::vector<int>>();
  auto id = sim.add_node("n", [out](Env& env) { return mutex_program(env, out); });
  sim.start(id);
  sim.run(2'000'000'000);
  ASSERT_EQ(out->size(), 8u);
  for (size_t i = 0; i < out->size(); i += 2) EXPECT_EQ((*out)[i], (*out)[i + 1]);
}

TEST(SimulatorTest, TaskExceptionIsReported) {
  Simulator sim(6);
  auto id = sim.add_node("n", [](Env& env) { return throwing(env); });
  sim.start(id);
  sim.run(1'000'000'000);
  ASSERT_EQ(sim.failures().size(), 1u);
  EXPECT_NE(sim.failures()[0].find("boom"), std::string::npos);
}

TEST(SimulatorTest, DiskTearKeepsPrefixOfInflightAppend) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; trial++) {
    SimDisk disk;
    disk.files()["f"] = "base";
    disk.begin_write("f", "0123456789", false);
    disk.begin_write("g", "new", true);
    disk.tear_in_flight(rng);
    const auto& f = disk.files().at("f");
    ASSERT_GE(f.size(), 4u);
    EXPECT_EQ(std::string("base0123456789").substr(0, f.size()), f);
    auto g = disk.files().find("g");
    if (g != disk.files().end()) EXPECT_EQ(g->second, "new");
  }
}

TEST(SimulatorTest, SameSeedGivesSameEventDigest) {
  auto run = [](uint64_t seed) {
    Simulator sim(seed);
    auto out = std::make_shared<std::vector<int>>();
    auto id = sim.add_node("n", [out](Env& env) { return mutex_program(env, out); });
    sim.start(id);
    sim.run(2'000'000'000);
    return std::make_pair(sim.events_run(), *out);
  };
  EXPECT_EQ(run(11), run(11));
}
