#include <gtest/gtest.h>

#include <random>

#include "vrsm/exactlyonce/exactlyonce.hpp"
#include "vrsm/kv/kv_machine.hpp"

using namespace vrsm;

namespace {

Bytes le64(uint64_t v) {
  Bytes b(8, '\0');
  for (int i = 0; i < 8; i++) b[i] = static_cast<char>(v >> (8 * i));
  return b;
}

KvOp random_op(std::mt19937_64& rng) {
  const char* keys[] = {"a", "b", "c"};
  Bytes k = keys[rng() % 3];
  Bytes v = std::to_string(rng() % 3);
  switch (rng() % 3) {
    case 0:
      return KvOp::put(k, v);
    case 1:
      return KvOp::get(k);
    default:
      return KvOp::cond_put(k, std::to_string(rng() % 3), v);
  }
}

// State after the first n operations, built from scratch.
KvMachine replay(const std::vector<Bytes>& ops, size_t n) {
  KvMachine m;
  for (size_t i = 0; i < n; i++) m.apply(ops[i], i);
  return m;
}

}  // namespace

TEST(KvOpTest, EncodingLayout) {
  Bytes put = encode_kv_op(KvOp::put("k", "vv"));
  EXPECT_EQ(put, Bytes(1, '\0') + le64(1) + "k" + le64(2) + "vv");
  Bytes get = encode_kv_op(KvOp::get("k"));
  EXPECT_EQ(get, Bytes(1, '\1') + le64(1) + "k");
  Bytes cp = encode_kv_op(KvOp::cond_put("k", "", "v"));
  EXPECT_EQ(cp, Bytes(1, '\2') + le64(1) + "k" + le64(0) + le64(1) + "v");
}

TEST(KvOpTest, RoundTripAndRejectsGarbage) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; i++) {
    KvOp op = random_op(rng);
    EXPECT_EQ(decode_kv_op(encode_kv_op(op)), op);
  }
  EXPECT_FALSE(decode_kv_op(Bytes(1, '\7') + le64(0)));
  EXPECT_FALSE(decode_kv_op(encode_kv_op(KvOp::get("k")) + "x"));
  EXPECT_FALSE(decode_kv_op(""));
}

TEST(KvMachineTest, ApplyAndRead) {
  KvMachine m;
  EXPECT_EQ(m.read(encode_kv_op(KvOp::get("x"))), (std::pair<uint64_t, Bytes>{0, ""}));
  EXPECT_EQ(m.apply(encode_kv_op(KvOp::put("x", "1")), 7), "");
  EXPECT_EQ(m.read(encode_kv_op(KvOp::get("x"))), (std::pair<uint64_t, Bytes>{8, "1"}));
  EXPECT_EQ(m.apply(encode_kv_op(KvOp::cond_put("x", "0", "2")), 8), "");
  EXPECT_EQ(m.read(encode_kv_op(KvOp::get("x"))).first, 8u);
  EXPECT_EQ(m.apply(encode_kv_op(KvOp::cond_put("x", "1", "2")), 9), "ok");
  EXPECT_EQ(m.read(encode_kv_op(KvOp::get("x"))), (std::pair<uint64_t, Bytes>{10, "2"}));
  EXPECT_EQ(m.apply(encode_kv_op(KvOp::get("x")), 10), "2");
  EXPECT_EQ(m.apply(encode_kv_op(KvOp::cond_put("y", "", "new")), 11), "ok");
}

TEST(KvMachineTest, SnapshotKeepsVersions) {
  KvMachine m;
  m.apply(encode_kv_op(KvOp::put("a", "1")), 0);
  m.apply(encode_kv_op(KvOp::put("b", "2")), 1);
  KvMachine n;
  n.set_state(m.get_state(), 2);
  EXPECT_EQ(n.values(), m.values());
  EXPECT_EQ(n.read(encode_kv_op(KvOp::get("a"))), (std::pair<uint64_t, Bytes>{1, "1"}));
  n.set_state("", 0);
  EXPECT_TRUE(n.values().empty());
}

// A read evaluated after n operations reports a prefix length p <= n; the
// reply must be the same on the state after every prefix between p and n.
TEST(KvMachineTest, ReadIsStableFromReportedPrefix) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; trial++) {
    size_t len = 1 + rng() % 20;
    std::vector<Bytes> ops;
    for (size_t i = 0; i < len; i++) ops.push_back(encode_kv_op(random_op(rng)));
    KvMachine m;
    for (size_t n = 0; n <= len; n++) {
      for (const char* k : {"a", "b", "c"}) {
        Bytes get = encode_kv_op(KvOp::get(k));
        auto [p, reply] = m.read(get);
        ASSERT_LE(p, n);
        for (size_t q = p; q <= n; q++) ASSERT_EQ(replay(ops, q).read(get).second, reply) << trial << " " << q;
      }
      if (n < len) m.apply(ops[n], n);
    }
  }
}

TEST(CounterMachineTest, IncrementsAndReads) {
  CounterMachine c;
  EXPECT_EQ(c.read("get"), (std::pair<uint64_t, Bytes>{0, "0"}));
  EXPECT_EQ(c.apply("inc", 0), "1");
  EXPECT_EQ(c.apply("get", 1), "1");
  EXPECT_EQ(c.apply("inc", 2), "2");
  EXPECT_EQ(c.read("get"), (std::pair<uint64_t, Bytes>{3, "2"}));
  CounterMachine d;
  d.set_state(c.get_state(), 3);
  EXPECT_EQ(d.value(), 2u);
  EXPECT_EQ(d.read("get").first, 3u);
}

TEST(EnvelopeTest, BitExactLayout) {
  OpEnvelope e{0x0102030405060708ull, 9, 2, "pay"};
  Bytes b = encode_envelope(e);
  EXPECT_EQ(b, le64(0x0102030405060708ull) + le64(9) + Bytes(1, '\2') + le64(3) + "pay");
  EXPECT_EQ(decode_envelope(b), e);
  EXPECT_FALSE(decode_envelope(b.substr(0, 20)));
  EXPECT_FALSE(decode_envelope(b + "z"));
}

namespace {

Bytes env_op(uint64_t client, uint64_t seq, Bytes payload) {
  return encode_envelope(OpEnvelope{client, seq, 0, std::move(payload)});
}

ExactlyOnceMachine counter_eo() { return ExactlyOnceMachine(std::make_unique<CounterMachine>()); }

uint64_t inner_value(ExactlyOnceMachine& m) { return static_cast<CounterMachine&>(m.inner()).value(); }

}  // namespace

TEST(ExactlyOnceTest, DuplicateAppliedOnceWithSameReply) {
  auto m = counter_eo();
  EXPECT_EQ(m.apply(env_op(5, 1, "inc"), 0), "1");
  EXPECT_EQ(m.apply(env_op(5, 1, "inc"), 1), "1");
  EXPECT_EQ(inner_value(m), 1u);
  EXPECT_EQ(m.apply(env_op(5, 2, "inc"), 2), "2");
  // Older than the latest: no effect, empty reply.
  EXPECT_EQ(m.apply(env_op(5, 1, "inc"), 3), "");
  EXPECT_EQ(inner_value(m), 2u);
}

TEST(ExactlyOnceTest, ClientsAreIndependent) {
  auto m = counter_eo();
  EXPECT_EQ(m.apply(env_op(1, 1, "inc"), 0), "1");
  EXPECT_EQ(m.apply(env_op(2, 1, "inc"), 1), "2");
  EXPECT_EQ(m.apply(env_op(1, 1, "inc"), 2), "1");
  EXPECT_EQ(inner_value(m), 2u);
}

TEST(ExactlyOnceTest, SnapshotKeepsDedupTable) {
  auto m = counter_eo();
  m.apply(env_op(1, 1, "inc"), 0);
  m.apply(env_op(1, 2, "inc"), 1);
  auto n = counter_eo();
  n.set_state(m.get_state(), 2);
  EXPECT_EQ(n.apply(env_op(1, 2, "inc"), 2), "2");
  EXPECT_EQ(inner_value(n), 2u);
  EXPECT_EQ(n.apply(env_op(1, 3, "inc"), 2), "3");
}

TEST(ExactlyOnceTest, UndecodableOpIsIgnored) {
  auto m = counter_eo();
  EXPECT_EQ(m.apply("inc", 0), "");
  EXPECT_EQ(inner_value(m), 0u);
}

// Random retransmissions of a per-client sequence must leave the state of a
// run without duplicates.
TEST(ExactlyOnceTest, RetriesMatchDuplicateFreeRun) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; trial++) {
    auto m = counter_eo();
    uint64_t seq[3] = {0, 0, 0};
    uint64_t unique = 0;
    uint64_t idx = 0;
    for (int step = 0; step < 30; step++) {
      uint64_t c = rng() % 3;
      bool retry = seq[c] > 0 && rng() % 2;
      if (!retry) {
        seq[c]++;
        unique++;
      }
      m.apply(env_op(c + 1, seq[c], "inc"), idx++);
    }
    EXPECT_EQ(inner_value(m), unique);
  }
}
