#include <gtest/gtest.h>

#include "support/node_harness.hpp"
#include "vrsm/configservice/config_clerk.hpp"
#include "vrsm/configservice/config_server.hpp"
#include "vrsm/rpc/rpc.hpp"

using namespace vrsm;
using namespace vrsm::sim;
using vrsm::testing::Holder;
using vrsm::testing::run_for;
using vrsm::testing::run_on;
using vrsm::testing::Slot;

namespace {

const std::vector<Address> kInitial = {Address("r0"), Address("r1")};
const std::vector<Address> kNext = {Address("r2"), Address("r3")};

Task<void> config_program(Env& env, ConfigServerOptions o, std::shared_ptr<Slot<ConfigServer>> slot) {
  Holder<ConfigServer> h(co_await ConfigServer::recover(env, o, kInitial), slot);
  HandlerTable t;
  h.obj->register_handlers(t);
  serve_rpc(env, o.paxos.peers[o.paxos.id], std::move(t));
  co_await Env::park();
}

struct Service {
  explicit Service(uint64_t seed = 1, ClockConfig clock = {}) : sim(seed) {
    for (size_t i = 0; i < 3; i++) peers.emplace_back("cfg" + std::to_string(i));
    for (size_t i = 0; i < 3; i++) {
      ConfigServerOptions o;
      o.paxos.id = i;
      o.paxos.peers = peers;
      o.paxos.group = 1;
      auto slot = std::make_shared<Slot<ConfigServer>>();
      slots.push_back(slot);
      ids.push_back(
          sim.add_node(peers[i].str(), [o, slot](Env& env) { return config_program(env, o, slot); }, clock));
      sim.start(ids.back());
    }
    run_for(sim, 10_ms);
    client = sim.add_node("client", [](Env&) -> Task<void> { co_await Env::park(); }, clock);
    sim.start(client);
  }

  ConfigServer& server(size_t i) { return *slots.at(i)->p; }

  void lead(size_t i) {
    auto* p = slots[i]->p;
    ASSERT_TRUE(run_on<bool>(sim, ids[i], [p](Env&) { return p->paxos().try_become_leader(); }).value_or(false));
  }
  ConfigServer::Reserved reserve(size_t i) {
    auto* p = slots[i]->p;
    return *run_on<ConfigServer::Reserved>(sim, ids[i], [p](Env&) { return p->reserve_epoch_and_get_config(); });
  }
  Err write(size_t i, uint64_t epoch, std::vector<Address> c) {
    auto* p = slots[i]->p;
    return *run_on<Err>(sim, ids[i], [p, epoch, c](Env&) { return p->try_write_config(epoch, c); });
  }
  ConfigServer::Lease lease(size_t i, uint64_t epoch) {
    auto* p = slots[i]->p;
    return *run_on<ConfigServer::Lease>(sim, ids[i], [p, epoch](Env&) { return p->get_lease(epoch); });
  }

  Simulator sim;
  std::vector<Address> peers;
  std::vector<NodeId> ids;
  std::vector<std::shared_ptr<Slot<ConfigServer>>> slots;
  NodeId client = kNoNode;
};

}  // namespace

TEST(ConfigStateTest, EncodingLayout) {
  ConfigState s{5, 4, 0x0102030405060708ull, {Address("a"), Address("bc")}};
  Bytes b = encode_config_state(s);
  // 4 fixed u64s, then two length-prefixed strings.
  ASSERT_EQ(b.size(), 8u * 4 + (8 + 1) + (8 + 2));
  EXPECT_EQ(static_cast<uint8_t>(b[0]), 5);
  EXPECT_EQ(static_cast<uint8_t>(b[8]), 4);
  EXPECT_EQ(static_cast<uint8_t>(b[16]), 0x08);
  EXPECT_EQ(static_cast<uint8_t>(b[23]), 0x01);
  EXPECT_EQ(static_cast<uint8_t>(b[24]), 2);
  EXPECT_EQ(decode_config_state(b), s);
  EXPECT_FALSE(decode_config_state(BytesView(b).substr(0, b.size() - 1)));
}

TEST(ConfigServiceTest, FirstReservationIsEpochTwo) {
  Service s;
  s.lead(0);
  auto r = s.reserve(0);
  EXPECT_EQ(r.err, Err::kOk);
  EXPECT_EQ(r.epoch, 2u);
  EXPECT_EQ(r.config, kInitial);
  auto r2 = s.reserve(0);
  EXPECT_EQ(r2.err, Err::kOk);
  EXPECT_EQ(r2.epoch, 3u);
}

TEST(ConfigServiceTest, FollowersRefuse) {
  Service s;
  s.lead(0);
  EXPECT_EQ(s.reserve(1).err, Err::kNotLeader);
  EXPECT_EQ(s.server(1).get_config().first, Err::kNotLeader);
}

TEST(ConfigServiceTest, WriteConfigMakesEpochLive) {
  Service s;
  s.lead(0);
  auto r = s.reserve(0);
  EXPECT_EQ(s.write(0, r.epoch, kNext), Err::kOk);
  auto [err, cfg] = s.server(0).get_config();
  EXPECT_EQ(err, Err::kOk);
  EXPECT_EQ(cfg, kNext);
  // Retrying the same write is harmless.
  EXPECT_EQ(s.write(0, r.epoch, kNext), Err::kOk);
}

TEST(ConfigServiceTest, SupersededReservationCannotGoLive) {
  Service s;
  s.lead(0);
  auto r2 = s.reserve(0);
  auto r3 = s.reserve(0);
  EXPECT_EQ(s.write(0, r2.epoch, kNext), Err::kStale);
  EXPECT_EQ(s.write(0, r3.epoch, kNext), Err::kOk);
}

TEST(ConfigServiceTest, AbandonedReservationIsSkipped) {
  Service s;
  s.lead(0);
  s.reserve(0);  // a controller that crashed after reserving
  auto r = s.reserve(0);
  EXPECT_EQ(r.epoch, 3u);
  EXPECT_EQ(s.write(0, r.epoch, kNext), Err::kOk);
}

TEST(ConfigServiceTest, LeaseFormulaAndEpochCheck) {
  Service s;
  s.lead(0);
  auto* node = &s.sim.node(s.ids[0]);
  TimeNs latest_before = node->time_range().latest;
  auto l = s.lease(0, 1);
  EXPECT_EQ(l.err, Err::kOk);
  EXPECT_GE(l.expiration, latest_before + 1'000'000'000ull);
  EXPECT_EQ(s.lease(0, 0).err, Err::kWrongEpoch);
  EXPECT_EQ(s.lease(0, 2).err, Err::kWrongEpoch);
}

TEST(ConfigServiceTest, LeaseExpirationNeverShrinks) {
  Service s;
  s.lead(0);
  TimeNs prev = 0;
  for (int i = 0; i < 20; i++) {
    auto l = s.lease(0, 1);
    ASSERT_EQ(l.err, Err::kOk);
    EXPECT_GE(l.expiration, prev);
    prev = l.expiration;
    run_for(s.sim, 150_ms);
  }
}

TEST(ConfigServiceTest, ReservationStopsLeaseRenewal) {
  Service s;
  s.lead(0);
  ASSERT_EQ(s.lease(0, 1).err, Err::kOk);
  s.reserve(0);
  EXPECT_EQ(s.lease(0, 1).err, Err::kWrongEpoch);
}

// The new epoch goes live only once the old lease has certainly expired.
TEST(ConfigServiceTest, WriteWaitsForOutstandingLease) {
  Service s(3, ClockConfig{50_ms, 20'000'000});
  s.lead(0);
  auto l = s.lease(0, 1);
  ASSERT_EQ(l.err, Err::kOk);
  auto r = s.reserve(0);
  auto* p = s.slots[0]->p;
  auto epoch = r.epoch;
  auto when = run_on<TimeNs>(s.sim, s.ids[0], [p, epoch](Env& env) -> Task<TimeNs> {
    return [](ConfigServer* p, uint64_t epoch, Env* env) -> Task<TimeNs> {
      Err err = co_await p->try_write_config(epoch, kNext);
      co_return err == Err::kOk ? env->time_range().earliest : 0;
    }(p, epoch, &env);
  });
  ASSERT_TRUE(when);
  EXPECT_GT(*when, l.expiration);
  // True (simulated) time is past the lease too.
  EXPECT_GT(s.sim.now(), l.expiration);
}

TEST(ConfigClerkTest, FindsLeaderAndReserves) {
  Service s;
  auto peers = s.peers;
  auto r = run_on<std::optional<ConfigClerk::Reserved>>(s.sim, s.client, [peers](Env& env) {
    return [](Env* env, std::vector<Address> peers) -> Task<std::optional<ConfigClerk::Reserved>> {
      ConfigClerk cc(*env, peers);
      co_return co_await cc.reserve_epoch_and_get_config(10_s);
    }(&env, peers);
  });
  ASSERT_TRUE(r && *r);
  EXPECT_EQ((*r)->epoch, 2u);
  EXPECT_EQ((*r)->config, kInitial);
}

TEST(ConfigClerkTest, WaitsUntilAServerIsReachable) {
  Service s;
  for (auto id : s.ids) s.sim.crash(id);
  s.sim.after(2_s, [&] {
    for (auto id : s.ids) s.sim.restart(id);
  });
  auto peers = s.peers;
  auto r = run_on<std::optional<std::vector<Address>>>(s.sim, s.client, [peers](Env& env) {
    return [](Env* env, std::vector<Address> peers) -> Task<std::optional<std::vector<Address>>> {
      ConfigClerk cc(*env, peers);
      std::optional<std::vector<Address>> c;
      while (!c) c = co_await cc.get_config(1_s);
      co_return c;
    }(&env, peers);
  });
  ASSERT_TRUE(r && *r);
  EXPECT_EQ(**r, kInitial);
  EXPECT_GT(s.sim.now(), 2'000'000'000u);
}
