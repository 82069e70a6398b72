#include <gtest/gtest.h>

#include <random>

#include "support/brute_force.hpp"
#include "vrsm/lincheck/checker.hpp"

namespace vrsm {
namespace {

Operation op(uint64_t client, std::string name, std::vector<std::string> args, std::string result, TimeNs inv,
             TimeNs ret) {
  return Operation{client, std::move(name), std::move(args), std::move(result), inv, ret, true};
}

TEST(Lincheck, SequentialPutThenGet) {
  History h = {op(1, "put", {"k", "1"}, "", 0, 1), op(1, "get", {"k"}, "1", 2, 3)};
  EXPECT_TRUE(check_linearizable(h, *kv_model()).ok);
}

TEST(Lincheck, ValueNeverWritten) {
  History h = {op(1, "put", {"k", "1"}, "", 0, 1), op(2, "get", {"k"}, "7", 2, 3)};
  auto r = check_linearizable(h, *kv_model());
  EXPECT_FALSE(r.ok);
  EXPECT_EQ(r.partition, "k");
}

TEST(Lincheck, StaleReadAcrossThreeClients) {
  // put 1, then put 2 completes, then a read that starts afterwards sees 1.
  History h = {
      op(1, "put", {"x", "1"}, "", 0, 10),    op(2, "get", {"x"}, "", 1, 5),
      op(3, "get", {"x"}, "1", 8, 14),        op(1, "put", {"x", "2"}, "", 12, 20),
      op(2, "get", {"x"}, "2", 15, 25),       op(3, "cond_put", {"x", "2", "3"}, "ok", 21, 30),
      op(1, "get", {"x"}, "3", 31, 35),       op(2, "put", {"y", "a"}, "", 26, 33),
      op(3, "get", {"y"}, "a", 34, 40),       op(1, "put", {"x", "4"}, "", 36, 41),
      op(2, "get", {"x"}, "3", 42, 45),  // stale: put 4 finished at 41
      op(3, "get", {"x"}, "4", 43, 46),
  };
  auto bad = check_linearizable(h, *kv_model());
  EXPECT_FALSE(bad.ok);
  EXPECT_EQ(bad.partition, "x");
  EXPECT_FALSE(testing::brute_force_linearizable<testing::MapSpec>(bad.prefix));

  h[10].result = "4";
  EXPECT_TRUE(check_linearizable(h, *kv_model()).ok);
}

TEST(Lincheck, TouchingIntervalsAreConcurrent) {
  History h = {op(1, "get", {"k"}, "1", 0, 5), op(2, "put", {"k", "1"}, "", 5, 9)};
  EXPECT_TRUE(check_linearizable(h, *kv_model()).ok);
  h[0].ret = 4;
  EXPECT_FALSE(check_linearizable(h, *kv_model()).ok);
}

TEST(Lincheck, IncompleteWriteMayTakeEffect) {
  History h = {op(1, "put", {"k", "1"}, "", 0, 0), op(2, "get", {"k"}, "1", 10, 12), op(2, "get", {"k"}, "", 13, 14)};
  h[0].completed = false;
  // Observed, then un-observed: the write cannot be both in and out.
  EXPECT_FALSE(check_linearizable(h, *kv_model()).ok);
  h.pop_back();
  EXPECT_TRUE(check_linearizable(h, *kv_model()).ok);
}

TEST(Lincheck, CondPutFailureReply) {
  History h = {op(1, "put", {"k", "a"}, "", 0, 1), op(2, "cond_put", {"k", "b", "c"}, "", 2, 3),
               op(1, "get", {"k"}, "a", 4, 5)};
  EXPECT_TRUE(check_linearizable(h, *kv_model()).ok);
  h[1].result = "ok";
  EXPECT_FALSE(check_linearizable(h, *kv_model()).ok);
}

TEST(Lincheck, Counter) {
  History h = {op(1, "inc", {}, "1", 0, 10), op(2, "inc", {}, "2", 1, 9), op(3, "get", {}, "2", 11, 12)};
  EXPECT_TRUE(check_linearizable(h, *counter_model()).ok);
  h[2].result = "1";
  EXPECT_FALSE(check_linearizable(h, *counter_model()).ok);
}

TEST(Lincheck, ShortestPrefixIsMinimal) {
  History h;
  for (int i = 0; i < 20; i++) h.push_back(op(1, "put", {"k", std::to_string(i)}, "", 10 * i, 10 * i + 1));
  h.push_back(op(2, "get", {"k"}, "3", 205, 206));
  for (int i = 0; i < 10; i++) h.push_back(op(3, "get", {"k"}, "19", 210 + i, 211 + i));
  auto r = check_linearizable(h, *kv_model());
  ASSERT_FALSE(r.ok);
  EXPECT_EQ(r.prefix.size(), 21u);
  EXPECT_EQ(r.prefix.back().result, "3");
}

TEST(Lincheck, StepBudget) {
  // Many concurrent writes of distinct values followed by an impossible read:
  // the search has to explore many orders.
  History h;
  for (int i = 0; i < 14; i++) h.push_back(op(i, "put", {"k", std::to_string(i)}, "", 0, 100));
  h.push_back(op(99, "get", {"k"}, "x", 101, 102));
  CheckOptions opts;
  opts.max_steps = 1000;
  EXPECT_THROW(check_linearizable(h, *kv_model(), opts), ResourceLimitError);
}

TEST(Lincheck, AgreesWithBruteForce) {
  std::mt19937_64 rng(7);
  int violations = 0;
  for (int i = 0; i < 2000; i++) {
    History h = testing::random_kv_history(rng, 8);
    bool expected = testing::brute_force_linearizable<testing::MapSpec>(h);
    auto r = check_linearizable(h, *kv_model());
    ASSERT_EQ(r.ok, expected) << history_to_jsonl(h);
    if (!r.ok) {
      violations++;
      EXPECT_FALSE(testing::brute_force_linearizable<testing::MapSpec>(r.prefix)) << history_to_jsonl(r.prefix);
    }
  }
  EXPECT_GT(violations, 200);
  EXPECT_LT(violations, 1800);
}

TEST(Lincheck, CheckIsPure) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 50; i++) {
    History h = testing::random_kv_history(rng, 8);
    auto a = check_linearizable(h, *kv_model());
    auto b = check_linearizable(h, *kv_model());
    EXPECT_EQ(a.ok, b.ok);
    EXPECT_EQ(a.steps, b.steps);
    EXPECT_EQ(a.prefix, b.prefix);
  }
}

TEST(History, JsonLinesRoundTrip) {
  History h = {op(1, "put", {"k", "v\n\"q"}, "", 3, 9), op(2, "get", {"k"}, "", 4, 0)};
  h[1].completed = false;
  auto text = history_to_jsonl(h);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 2);
  EXPECT_EQ(history_from_jsonl(text), h);
  EXPECT_THROW(history_from_jsonl("{\"client\":1}\n"), std::runtime_error);
}

TEST(History, RecorderTimestamps) {
  TimeNs now = 5;
  HistoryRecorder rec([&] { return now; });
  auto id = rec.invoke(1, "get", {"k"});
  now = 8;
  rec.complete(id, "v");
  rec.invoke(2, "put", {"k", "w"});
  auto h = rec.snapshot();
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].invoke, 5u);
  EXPECT_EQ(h[0].ret, 8u);
  EXPECT_TRUE(h[0].completed);
  EXPECT_FALSE(h[1].completed);
}

}  // namespace
}  // namespace vrsm
