#include <gtest/gtest.h>

#include <algorithm>

#include "support/node_harness.hpp"
#include "vrsm/kv/kv_machine.hpp"
#include "vrsm/replica/replica_server.hpp"
#include "vrsm/rpc/rpc.hpp"

using namespace vrsm;
using namespace vrsm::sim;
using vrsm::testing::Holder;
using vrsm::testing::run_for;
using vrsm::testing::run_on;
using vrsm::testing::Slot;

namespace {

using Reply = ReplicaServer::Reply;
using SealReply = ReplicaServer::SealReply;
using EpochReply = ReplicaServer::EpochReply;

// Replica servers without lease renewal or commit broadcasting, so tests
// drive every step.
Task<void> replica_program(Env& env, ReplicaOptions o, VsmFactory f, std::shared_ptr<Slot<ReplicaServer>> slot) {
  Address self = o.self;
  Holder<ReplicaServer> h(co_await ReplicaServer::recover(env, o, f), slot);
  HandlerTable t;
  h.obj->register_handlers(t);
  serve_rpc(env, self, std::move(t));
  co_await Env::park();
}

VsmFactory counter_factory() {
  return [] { return std::make_unique<CounterMachine>(); };
}

struct Replicas {
  explicit Replicas(size_t n, uint64_t seed = 1) : sim(seed) {
    for (size_t i = 0; i < n; i++) addrs.emplace_back("r" + std::to_string(i));
    for (size_t i = 0; i < n; i++) {
      ReplicaOptions o;
      o.self = addrs[i];
      o.service = 1;
      auto slot = std::make_shared<Slot<ReplicaServer>>();
      slots.push_back(slot);
      VsmFactory f = counter_factory();
      ids.push_back(sim.add_node(addrs[i].str(), [o, f, slot](Env& env) { return replica_program(env, o, f, slot); }));
      sim.start(ids.back());
    }
    run_for(sim, 10_ms);
  }

  ReplicaServer& r(size_t i) { return *slots.at(i)->p; }

  EpochReply set_epoch(size_t i, uint64_t e, EpochState st = {}) {
    auto* p = slots[i]->p;
    return *run_on<EpochReply>(sim, ids[i], [p, e, st](Env&) { return p->set_new_epoch_state(e, st); });
  }
  Err promote(size_t i, uint64_t e, std::vector<Address> cfg) {
    auto* p = slots[i]->p;
    return *run_on<Err>(sim, ids[i], [p, e, cfg](Env&) { return p->become_primary(e, cfg); });
  }
  std::optional<Reply> apply(size_t i, Bytes op, Nanos limit = 10_s) {
    auto* p = slots[i]->p;
    return run_on<Reply>(sim, ids[i], [p, op](Env&) { return p->apply(op); }, limit);
  }
  Err backup(size_t i, uint64_t e, uint64_t idx, Bytes op) {
    auto* p = slots[i]->p;
    return *run_on<Err>(sim, ids[i], [p, e, idx, op](Env&) { return p->apply_as_backup(e, idx, op); });
  }
  SealReply seal(size_t i, uint64_t e) {
    auto* p = slots[i]->p;
    return *run_on<SealReply>(sim, ids[i], [p, e](Env&) { return p->get_state_and_seal(e); });
  }

  // Epoch 1 on every server with server 0 as primary.
  void start_epoch_one() {
    for (size_t i = 0; i < addrs.size(); i++) ASSERT_EQ(set_epoch(i, 1).err, Err::kOk);
    ASSERT_EQ(promote(0, 1, addrs), Err::kOk);
  }

  Simulator sim;
  std::vector<Address> addrs;
  std::vector<NodeId> ids;
  std::vector<std::shared_ptr<Slot<ReplicaServer>>> slots;
};

uint64_t counter_of(ReplicaServer& r) { return static_cast<CounterMachine&>(r.state_machine()).value(); }

Task<void> apply_into(ReplicaServer* p, std::vector<Bytes>* out) {
  auto r = co_await p->apply("inc");
  out->push_back(r.err == Err::kOk ? r.payload : "err");
}

}  // namespace

TEST(EpochStateTest, EncodingLayoutAndRoundTrip) {
  EpochState s{3, "snap"};
  Bytes b = encode_epoch_state(s);
  ASSERT_EQ(b.size(), 8u + 8u + 4u);
  EXPECT_EQ(static_cast<uint8_t>(b[0]), 3);
  EXPECT_EQ(static_cast<uint8_t>(b[8]), 4);
  EXPECT_EQ(b.substr(16), "snap");
  EXPECT_EQ(decode_epoch_state(b), s);
  EXPECT_FALSE(decode_epoch_state(BytesView(b).substr(0, 10)));
}

TEST(ReplicaTest, ApplyReachesEveryServerAtTheSameIndex) {
  Replicas g(3);
  g.start_epoch_one();
  auto r = g.apply(0, "inc");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->err, Err::kOk);
  EXPECT_EQ(r->payload, "1");
  for (size_t i = 0; i < 3; i++) {
    EXPECT_EQ(g.r(i).next_index(), 1u) << i;
    EXPECT_EQ(counter_of(g.r(i)), 1u) << i;
  }
  EXPECT_EQ(g.r(0).committed_next(), 1u);
}

TEST(ReplicaTest, ConcurrentAppliesGetDistinctIndexes) {
  Replicas g(3);
  g.start_epoch_one();
  std::vector<Bytes> replies;
  for (int i = 0; i < 10; i++) g.sim.node(g.ids[0]).spawn(apply_into(g.slots[0]->p, &replies));
  g.sim.run(g.sim.now() + 10'000'000'000ull, [&] { return replies.size() == 10; });
  ASSERT_EQ(replies.size(), 10u);
  // Sequential oracle: the k-th applied increment returns k.
  std::vector<uint64_t> got;
  for (auto& r : replies) got.push_back(std::stoull(r));
  std::sort(got.begin(), got.end());
  for (uint64_t k = 0; k < 10; k++) EXPECT_EQ(got[k], k + 1);
  for (size_t i = 0; i < 3; i++) EXPECT_EQ(counter_of(g.r(i)), 10u);
}

TEST(ReplicaTest, UnreachableBackupBlocksApply) {
  Replicas g(3);
  g.start_epoch_one();
  g.sim.crash(g.ids[2]);
  auto r = g.apply(0, "inc", 5_s);
  EXPECT_TRUE(!r || r->err != Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 0u);
}

TEST(ReplicaTest, NonPrimaryRefusesApply) {
  Replicas g(3);
  g.start_epoch_one();
  auto r = g.apply(1, "inc");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->err, Err::kNotPrimary);
}

TEST(ReplicaTest, ApplyAsBackupChecksEpochAndOrder) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 2).err, Err::kOk);
  EXPECT_EQ(g.backup(0, 2, 0, "inc"), Err::kOk);
  EXPECT_EQ(g.r(0).next_index(), 1u);
  EXPECT_EQ(g.backup(0, 1, 1, "inc"), Err::kStale);
  EXPECT_EQ(g.backup(0, 3, 1, "inc"), Err::kFutureEpoch);
  // A retransmitted copy is acknowledged without being applied again.
  EXPECT_EQ(g.backup(0, 2, 0, "inc"), Err::kOk);
  EXPECT_EQ(counter_of(g.r(0)), 1u);
  EXPECT_EQ(g.backup(0, 2, 5, "inc"), Err::kOutOfOrder);
  EXPECT_EQ(g.r(0).next_index(), 1u);
}

TEST(ReplicaTest, SealIsRepeatableAndRejectsOldEpochs) {
  Replicas g(3);
  g.start_epoch_one();
  ASSERT_TRUE(g.apply(0, "inc"));
  ASSERT_TRUE(g.apply(0, "inc"));
  auto s1 = g.seal(1, 2);
  ASSERT_EQ(s1.err, Err::kOk);
  EXPECT_TRUE(g.r(1).is_sealed());
  EXPECT_EQ(s1.state.next_index, 2u);
  auto s2 = g.seal(1, 2);
  EXPECT_EQ(s2.err, Err::kOk);
  EXPECT_EQ(s2.state, s1.state);
  EXPECT_EQ(g.seal(1, 1).err, Err::kStale);
  EXPECT_EQ(g.backup(1, 1, 2, "inc"), Err::kSealed);
}

TEST(ReplicaTest, SealSurvivesRestart) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 1).err, Err::kOk);
  ASSERT_EQ(g.backup(0, 1, 0, "inc"), Err::kOk);
  auto s = g.seal(0, 2);
  g.sim.crash(g.ids[0]);
  g.sim.restart(g.ids[0]);
  run_for(g.sim, 10_ms);
  EXPECT_TRUE(g.r(0).is_sealed());
  EXPECT_EQ(g.seal(0, 2).state, s.state);
}

TEST(ReplicaTest, NewEpochStateInstallsAndRejectsOlder) {
  Replicas g(1);
  CounterMachine m;
  m.apply("inc", 0);
  m.apply("inc", 1);
  EpochState st{2, m.get_state()};
  auto r = g.set_epoch(0, 3, st);
  EXPECT_EQ(r.err, Err::kOk);
  EXPECT_EQ(g.r(0).epoch(), 3u);
  EXPECT_EQ(g.r(0).next_index(), 2u);
  EXPECT_EQ(counter_of(g.r(0)), 2u);
  auto dup = g.set_epoch(0, 3, st);
  EXPECT_EQ(dup.err, Err::kStale);
  EXPECT_EQ(dup.epoch, 3u);
  auto old = g.set_epoch(0, 1, EpochState{});
  EXPECT_EQ(old.err, Err::kStale);
  EXPECT_EQ(counter_of(g.r(0)), 2u);
}

TEST(ReplicaTest, BecomePrimaryChecksEpoch) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 2).err, Err::kOk);
  EXPECT_EQ(g.promote(0, 1, g.addrs), Err::kWrongEpoch);
  EXPECT_EQ(g.promote(0, 2, g.addrs), Err::kOk);
  EXPECT_TRUE(g.r(0).is_primary());
  EXPECT_EQ(g.promote(0, 2, g.addrs), Err::kOk);
}

TEST(ReplicaTest, TransferredOperationsAreCommittedByNewPrimary) {
  Replicas g(1);
  CounterMachine m;
  for (uint64_t i = 0; i < 3; i++) m.apply("inc", i);
  ASSERT_EQ(g.set_epoch(0, 2, EpochState{3, m.get_state()}).err, Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 0u);
  ASSERT_EQ(g.promote(0, 2, g.addrs), Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 3u);
}

TEST(ReplicaTest, RestartedServerCannotBecomePrimary) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 2).err, Err::kOk);
  g.sim.crash(g.ids[0]);
  g.sim.restart(g.ids[0]);
  run_for(g.sim, 10_ms);
  EXPECT_EQ(g.r(0).epoch(), 2u);
  EXPECT_EQ(g.promote(0, 2, g.addrs), Err::kWrongEpoch);
}

TEST(ReplicaTest, CommitIndexIsMonotoneAndBounded) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 1).err, Err::kOk);
  for (uint64_t i = 0; i < 5; i++) ASSERT_EQ(g.backup(0, 1, i, "inc"), Err::kOk);
  EXPECT_EQ(g.r(0).increase_commit_index(1, 3), Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 3u);
  EXPECT_EQ(g.r(0).increase_commit_index(1, 2), Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 3u);
  EXPECT_EQ(g.r(0).increase_commit_index(1, 99), Err::kOk);
  EXPECT_EQ(g.r(0).committed_next(), 5u);
  EXPECT_EQ(g.r(0).increase_commit_index(0, 1), Err::kStale);
}

TEST(ReplicaTest, ReadWithoutLeaseIsRefused) {
  Replicas g(1);
  ASSERT_EQ(g.set_epoch(0, 1).err, Err::kOk);
  auto* p = g.slots[0]->p;
  auto r = run_on<Reply>(g.sim, g.ids[0], [p](Env&) { return p->apply_readonly("get"); });
  ASSERT_TRUE(r);
  EXPECT_EQ(r->err, Err::kRetry);
}
