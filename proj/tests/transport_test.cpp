#include <gtest/gtest.h>

#include "vrsm/sim/network.hpp"
#include "vrsm/sim/simulator.hpp"

using namespace vrsm;
using namespace vrsm::sim;

namespace {

struct Inbox {
  std::vector<Bytes> got;
  std::vector<Bytes> echoes_a;
  std::vector<Bytes> echoes_b;
  int incarnations = 0;
};

// Records every message; echoes it back when `echo` is set.
Task<void> sink(Env& env, std::shared_ptr<Inbox> box, bool echo) {
  box->incarnations++;
  auto l = env.listen(Address("srv"));
  while (auto in = co_await l->receive()) {
    box->got.push_back(in->payload);
    if (echo) in->reply->send(in->payload);
  }
}

Task<void> sender(Env& env, std::vector<Bytes> msgs, std::string to) {
  auto c = env.connect(Address(to));
  for (auto& m : msgs) c->send(m);
  co_await Env::park();
}

Task<void> collect(std::shared_ptr<Connection> c, std::vector<Bytes>* out) {
  while (auto m = co_await c->receive()) out->push_back(*m);
}

Task<void> two_connections(Env& env, std::shared_ptr<Inbox> box) {
  auto a = env.connect(Address("srv"));
  auto b = env.connect(Address("srv"));
  env.spawn(collect(a, &box->echoes_a));
  env.spawn(collect(b, &box->echoes_b));
  for (int i = 0; i < 5; i++) {
    a->send("a" + std::to_string(i));
    b->send("b" + std::to_string(i));
  }
  co_await Env::park();
}

struct Net {
  explicit Net(uint64_t seed, FaultProfile f = {}) : sim(seed) { sim.network().set_faults(f); }
  Simulator sim;
  std::shared_ptr<Inbox> box = std::make_shared<Inbox>();
  NodeId server = kNoNode;

  void serve(bool echo = false) {
    auto b = box;
    server = sim.add_node("server", [b, echo](Env& env) { return sink(env, b, echo); });
    sim.start(server);
    // Let the server bind before anyone sends.
    sim.run(sim.now() + 1'000'000);
  }
  void send(std::vector<Bytes> msgs, std::string to = "srv") {
    auto n = sim.add_node("client", [msgs, to](Env& env) { return sender(env, msgs, to); });
    sim.start(n);
  }
};

std::vector<Bytes> numbered(int n) {
  std::vector<Bytes> v;
  for (int i = 0; i < n; i++) v.push_back("m" + std::to_string(i));
  return v;
}

}  // namespace

TEST(TransportTest, SendIsDelivered) {
  Net net(1);
  net.serve();
  net.send({"abc"});
  net.sim.run(1'000'000'000);
  EXPECT_EQ(net.box->got, std::vector<Bytes>{"abc"});
}

TEST(TransportTest, UnboundAddressIsABlackHole) {
  Net net(1);
  net.serve();
  net.send(numbered(5), "nobody");
  net.sim.run(1'000'000'000);
  EXPECT_TRUE(net.box->got.empty());
  EXPECT_EQ(net.sim.network().stats().delivered, 0u);
}

TEST(TransportTest, RepliesStayOnTheirConnection) {
  Net net(3, FaultProfile{0, 0, 1_ms, 50_ms});
  net.serve(true);
  auto box = net.box;
  auto c = net.sim.add_node("client", [box](Env& env) { return two_connections(env, box); });
  net.sim.start(c);
  net.sim.run(2'000'000'000);
  ASSERT_EQ(box->echoes_a.size(), 5u);
  ASSERT_EQ(box->echoes_b.size(), 5u);
  for (auto& m : box->echoes_a) EXPECT_EQ(m[0], 'a');
  for (auto& m : box->echoes_b) EXPECT_EQ(m[0], 'b');
}

TEST(TransportTest, FixedDelayWithoutFaultsIsFifo) {
  Net net(5, FaultProfile{0, 0, 7_ms, 7_ms});
  net.serve();
  net.send(numbered(50));
  net.sim.run(1'000'000'000);
  EXPECT_EQ(net.box->got, numbered(50));
}

TEST(TransportTest, DropEverything) {
  Net net(5, FaultProfile{1.0, 0, 1_ms, 1_ms});
  net.serve();
  net.send(numbered(20));
  net.sim.run(1'000'000'000);
  EXPECT_TRUE(net.box->got.empty());
}

TEST(TransportTest, DuplicateEverythingDeliversTwice) {
  Net net(5, FaultProfile{0, 1.0, 1_ms, 10_ms});
  net.serve();
  net.send({"x"});
  net.sim.run(1'000'000'000);
  EXPECT_EQ(net.box->got, (std::vector<Bytes>{"x", "x"}));
  EXPECT_EQ(net.sim.network().stats().delivered, 2u);
}

// Random delays reorder messages in some seeds, and every message still
// arrives exactly once.
TEST(TransportTest, RandomDelaysReorder) {
  bool reordered = false;
  for (uint64_t seed = 1; seed <= 20; seed++) {
    Net net(seed, FaultProfile{0, 0, 1_ms, 200_ms});
    net.serve();
    net.send(numbered(10));
    net.sim.run(1'000'000'000);
    auto got = net.box->got;
    ASSERT_EQ(got.size(), 10u);
    if (got != numbered(10)) reordered = true;
    std::sort(got.begin(), got.end());
    auto want = numbered(10);
    std::sort(want.begin(), want.end());
    EXPECT_EQ(got, want);
  }
  EXPECT_TRUE(reordered);
}

TEST(TransportTest, CrashDropsBlockedReceiverAndRestartListensAgain) {
  Net net(9);
  net.serve();
  net.sim.run(100'000'000);
  net.sim.crash(net.server);
  net.send({"lost"});
  net.sim.run(200'000'000);
  net.sim.restart(net.server);
  net.sim.run(300'000'000);
  net.send({"fresh"});
  net.sim.run(1'000'000'000);
  EXPECT_EQ(net.box->incarnations, 2);
  EXPECT_EQ(net.box->got, std::vector<Bytes>{"fresh"});
}

TEST(TransportTest, SeveredLinkDropsAndRepairRestores) {
  Net net(11);
  net.serve();
  auto n = net.sim.add_node("client", [](Env& env) -> Task<void> {
    auto c = env.connect(Address("srv"));
    c->send("before");
    co_await env.sleep(100_ms);
    c->send("during");
    co_await env.sleep(100_ms);
    c->send("after");
    co_await Env::park();
  });
  net.sim.start(n);
  net.sim.run(50'000'000);
  net.sim.network().sever(n, net.server);
  net.sim.run(150'000'000);
  net.sim.network().repair(n, net.server);
  net.sim.run(1'000'000'000);
  EXPECT_EQ(net.box->got, (std::vector<Bytes>{"before", "after"}));
}
