// Copyright 2026 The HPTMT Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <atomic>
#include <mutex>

#include "hptmt/distops.hpp"
#include "hptmt/selftest.hpp"
#include "oracles.hpp"

namespace hptmt {
namespace {

using Trace = std::vector<std::string>;

Table Slice2(const Table& t, int rank, int p) {
  size_t per = (t.num_rows() + static_cast<size_t>(p) - 1) / static_cast<size_t>(p);
  size_t begin = std::min(t.num_rows(), per * static_cast<size_t>(rank));
  return Slice(t, begin, std::min(per, t.num_rows() - begin));
}

TEST(HashDestinations, EqualKeysColocate) {
  Rng rng(1);
  Table t = RandomTable(rng, {.rows = 300, .distinct = 20});
  const std::vector<size_t> cols = {0};
  auto dest = HashDestinations(t, cols, 4);
  std::map<std::string, int> seen;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    ASSERT_GE(dest[r], 0);
    ASSERT_LT(dest[r], 4);
    auto [it, fresh] = seen.emplace(oracle::Token(t.column(0).GetValue(r)), dest[r]);
    EXPECT_EQ(it->second, dest[r]);
  }
}

TEST(DistJoin, SingleRankIsLocalJoinByteForByte) {
  Rng rng(2);
  Table l = RandomTable(rng, {.rows = 200, .distinct = 20});
  Table r = RandomTable(rng, {.rows = 150, .distinct = 20});
  RunLocalThreads(1, [&](Communicator& comm) {
    DistContext ctx(comm);
    for (JoinKind k : {JoinKind::kInner, JoinKind::kFullOuter}) {
      EXPECT_EQ(SerializeTable(DistJoin(ctx, l, r, {"k"}, {"k"}, k)),
                SerializeTable(LocalJoin(l, r, {"k"}, {"k"}, k)));
    }
  });
}

TEST(DistJoin, TwoRanksInner) {
  std::mutex mu;
  std::vector<Table> parts(2);
  RunLocalThreads(2, [&](Communicator& comm) {
    DistContext ctx(comm);
    int64_t r = comm.rank();
    Table l = MakeTable({{"k", MakeInt64Column({r})}, {"lv", MakeInt64Column({10 + r})}});
    Table rt = MakeTable({{"k", MakeInt64Column({r + 1})}, {"rv", MakeInt64Column({20 + r})}});
    comm.set_tracing(true);
    Table out = DistJoin(ctx, l, rt, {"k"}, {"k"}, JoinKind::kInner);
    EXPECT_EQ(comm.trace(), (Trace{"shuffle_table", "shuffle_table"}));
    std::lock_guard lock(mu);
    parts[static_cast<size_t>(comm.rank())] = out;
  });
  Table want = MakeTable({{"k", MakeInt64Column({1})}, {"lv", MakeInt64Column({11})},
                          {"r_k", MakeInt64Column({1})}, {"rv", MakeInt64Column({20})}});
  EXPECT_TRUE(CanonicalEqual(Concat(parts), want));
}

TEST(DistJoin, ArgumentErrorsBeforeAnyMessage) {
  std::atomic<int> errors = 0;
  RunLocalThreads(3, [&](Communicator& comm) {
    DistContext ctx(comm);
    comm.set_tracing(true);
    Table l = MakeTable({{"k", MakeInt64Column({1})}});
    Table r = MakeTable({{"k", MakeUtf8Column({"1"})}});
    try {
      DistJoin(ctx, l, r, {"k"}, {"k"}, JoinKind::kInner);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kKeyTypeMismatch && comm.trace().empty()) ++errors;
    }
  });
  EXPECT_EQ(errors, 3);
}

TEST(DistSort, RangePartitionedAndSorted) {
  Rng rng(3);
  Table t = RandomTable(rng, {.rows = 600, .distinct = 500});
  for (int p : {1, 2, 3, 4}) {
    std::vector<Table> parts(static_cast<size_t>(p));
    std::vector<Trace> traces(static_cast<size_t>(p));
    RunLocalThreads(p, [&](Communicator& comm) {
      DistContext ctx(comm);
      comm.set_tracing(true);
      parts[static_cast<size_t>(comm.rank())] = DistSort(ctx, Slice2(t, comm.rank(), p), {"y", "k"});
      traces[static_cast<size_t>(comm.rank())] = comm.trace();
    });
    Table all = Concat(parts);
    EXPECT_FALSE(oracle::ExactDiff(all, OrderBy(t, {"y", "k"}))) << "p=" << p;
    if (p > 1) {
      EXPECT_EQ(traces[0], (Trace{"allgather", "shuffle_table"}));
    }
  }
}

TEST(DistSort, AllEqualKeys) {
  Table t = MakeTable({{"a", MakeInt64Column(std::vector<std::optional<int64_t>>(100, 5))},
                       {"i", MakeInt64Column([] {
                          std::vector<std::optional<int64_t>> v;
                          for (int64_t i = 0; i < 100; ++i) v.push_back(i);
                          return v;
                        }())}});
  std::vector<Table> parts(3);
  RunLocalThreads(3, [&](Communicator& comm) {
    DistContext ctx(comm);
    parts[static_cast<size_t>(comm.rank())] = DistSort(ctx, Slice2(t, comm.rank(), 3), {"a"});
  });
  EXPECT_TRUE(CanonicalEqual(Concat(parts), t));
}

TEST(DistGroupBy, SingleDistinctKeyGivesOneRow) {
  std::vector<Table> parts(4);
  RunLocalThreads(4, [&](Communicator& comm) {
    DistContext ctx(comm);
    Table t = MakeTable({{"k", MakeInt64Column({7, 7})}, {"v", MakeFloat64Column({1.0, 2.0})}});
    parts[static_cast<size_t>(comm.rank())] =
        DistGroupByAggregate(ctx, t, {"k"}, {{"v", AggKind::kMean}, {"v", AggKind::kCount}});
  });
  Table all = Concat(parts);
  EXPECT_TRUE(CanonicalEqual(all, MakeTable({{"k", MakeInt64Column({7})},
                                             {"v_mean", MakeFloat64Column({1.5})},
                                             {"v_count", MakeInt64Column({8})}})));
}

TEST(DistUnique, DuplicatesAcrossRanksCollapse) {
  std::vector<Table> parts(4);
  RunLocalThreads(4, [&](Communicator& comm) {
    DistContext ctx(comm);
    Table t = MakeTable({{"d", MakeUtf8Column({"same", "r" + std::to_string(comm.rank())})}});
    parts[static_cast<size_t>(comm.rank())] = DistUnique(ctx, t);
  });
  Table all = Concat(parts);
  EXPECT_EQ(all.num_rows(), 5u);
  EXPECT_EQ(Unique(all).num_rows(), 5u);
}

TEST(DistSetOp, DisjointIntersectIsEmpty) {
  RunLocalThreads(3, [&](Communicator& comm) {
    DistContext ctx(comm);
    Table a = MakeTable({{"x", MakeInt64Column({comm.rank()})}});
    Table b = MakeTable({{"x", MakeInt64Column({100 + comm.rank()})}});
    EXPECT_EQ(DistSetOp(ctx, a, b, SetOpKind::kIntersect).num_rows(), 0u);
  });
}

TEST(DistIsIn, ProbeStaysLocalAndLimitApplies) {
  RunLocalThreads(2, [&](Communicator& comm) {
    DistContext ctx(comm);
    Table t = MakeTable({{"d", MakeUtf8Column({"a", "b", "c"})}});
    Table probe = comm.rank() == 0 ? MakeTable({{"d", MakeUtf8Column({"b"})}})
                                   : MakeTable({{"d", MakeUtf8Column({"c"})}});
    comm.set_tracing(true);
    Table got = DistIsIn(ctx, t, "d", probe, "d");
    EXPECT_EQ(comm.trace(), Trace{"allgather"});
    EXPECT_TRUE(CanonicalEqual(got, MakeTable({{"d", MakeUtf8Column({"b", "c"})}})));
    Table none = DistIsIn(ctx, t, "d", Table::Empty(probe.schema()), "d");
    EXPECT_EQ(none.num_rows(), 0u);
    ctx.probe_limit = 1;
    try {
      DistIsIn(ctx, t, "d", probe, "d");
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kProbeTooLarge);
    }
  });
}

TEST(DistStandardScale, TwoPointAndConstant) {
  std::vector<Table> parts(2);
  RunLocalThreads(2, [&](Communicator& comm) {
    DistContext ctx(comm);
    double v = comm.rank() == 0 ? 0.0 : 2.0;
    Table t = MakeTable({{"x", MakeFloat64Column({v})}, {"c", MakeInt64Column({3})},
                         {"s", MakeUtf8Column({"keep"})}});
    comm.set_tracing(true);
    parts[static_cast<size_t>(comm.rank())] = DistStandardScale(ctx, t, {"x", "c"});
    EXPECT_EQ(comm.trace(), Trace{"allreduce"});
  });
  EXPECT_EQ(parts[0].column(0).GetFloat64(0), -1.0);
  EXPECT_EQ(parts[1].column(0).GetFloat64(0), 1.0);
  EXPECT_EQ(parts[0].column(1).GetFloat64(0), 0.0);
  EXPECT_EQ(parts[1].column(2).GetString(0), "keep");
}

TEST(DistStandardScale, Errors) {
  RunLocalThreads(2, [&](Communicator& comm) {
    DistContext ctx(comm);
    Table t = MakeTable({{"x", MakeFloat64Column({comm.rank() == 0 ? std::optional<double>(1.0) : std::nullopt})},
                         {"s", MakeUtf8Column({"a"})}});
    try {
      DistStandardScale(ctx, t, {"x"});
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDegenerateColumn);
    }
    try {
      DistStandardScale(ctx, t, {"s"});
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kWrongType);
    }
  });
}

TEST(OracleSuite, DistributedMatchesLocalSmall) {
  OracleSuiteOptions opts;
  opts.instances = 15;
  opts.max_rows = 300;
  for (int p : {1, 2, 3, 4}) {
    std::vector<OracleCaseResult> results;
    RunLocalThreads(p, [&](Communicator& comm) {
      auto r = RunOracleSuite(comm, opts);
      if (comm.rank() == 0) results = r;
    });
    ASSERT_FALSE(results.empty());
    for (const auto& r : results) {
      EXPECT_EQ(r.failures, 0) << r.op << " p=" << p << ": " << r.first_failure;
    }
  }
}

}  // namespace
}  // namespace hptmt
