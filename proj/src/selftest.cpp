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

#include "hptmt/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "hptmt/distops.hpp"

namespace hptmt {

Table RandomTable(Rng& rng, const RandomTableOptions& opts) {
  ColumnBuilder k(DataType::kInt64), s(DataType::kUtf8), x(DataType::kFloat64),
      y(DataType::kFloat64), n(DataType::kInt64), b(DataType::kBool);
  const uint64_t distinct = std::max<size_t>(opts.distinct, 1);
  auto null = [&] { return rng.Bernoulli(opts.null_prob); };
  for (size_t r = 0; r < opts.rows; ++r) {
    null() ? k.AppendNull() : k.AppendInt64(static_cast<int64_t>(rng.Below(distinct)));
    null() ? s.AppendNull() : s.AppendString("key" + std::to_string(rng.Below(distinct)));
    if (null()) {
      x.AppendNull();
    } else if (rng.Bernoulli(opts.special_prob)) {
      static constexpr double kSpecial[] = {std::numeric_limits<double>::quiet_NaN(), -0.0, 0.0,
                                            std::numeric_limits<double>::infinity(),
                                            -std::numeric_limits<double>::infinity()};
      x.AppendFloat64(kSpecial[rng.Below(std::size(kSpecial))]);
    } else {
      x.AppendFloat64(rng.Normal());
    }
    null() ? y.AppendNull() : y.AppendFloat64(rng.Normal() * 3.0 + 1.0);
    null() ? n.AppendNull() : n.AppendInt64(static_cast<int64_t>(rng.Below(5)) - 2);
    null() ? b.AppendNull() : b.AppendBool(rng.Bernoulli(0.5));
  }
  return MakeTable({{"k", k.Finish()},
                    {"s", s.Finish()},
                    {"x", x.Finish()},
                    {"y", y.Finish()},
                    {"n", n.Finish()},
                    {"b", b.Finish()}});
}

std::vector<int> RandomOwners(size_t rows, int world_size, Rng& rng) {
  std::vector<int> owners(rows, 0);
  const auto p = static_cast<uint64_t>(world_size);
  if (rng.Bernoulli(0.1)) {
    std::fill(owners.begin(), owners.end(), static_cast<int>(rng.Below(p)));
  } else {
    for (int& o : owners) o = static_cast<int>(rng.Below(p));
  }
  return owners;
}

Table OwnedRows(const Table& t, const std::vector<int>& owners, int rank) {
  std::vector<size_t> rows;
  for (size_t i = 0; i < owners.size(); ++i) {
    if (owners[i] == rank) rows.push_back(i);
  }
  return Take(t, rows);
}

Table GatheredOrder(const Table& t, const std::vector<int>& owners, int world_size) {
  std::vector<size_t> rows;
  for (int r = 0; r < world_size; ++r) {
    for (size_t i = 0; i < owners.size(); ++i) {
      if (owners[i] == r) rows.push_back(i);
    }
  }
  return Take(t, rows);
}

Table ReferenceStandardScale(const Table& t, const std::vector<std::string>& cols) {
  Table out = t;
  for (const auto& name : cols) {
    const Column& c = t.column(name);
    auto value = [&](size_t r) {
      return c.type() == DataType::kInt64 ? static_cast<double>(c.GetInt64(r)) : c.GetFloat64(r);
    };
    double n = 0, sum = 0, sum_sq = 0;
    for (size_t r = 0; r < c.size(); ++r) {
      if (!c.IsValid(r)) continue;
      n += 1;
      sum += value(r);
      sum_sq += value(r) * value(r);
    }
    if (n < 2) Raise(ErrorCode::kDegenerateColumn, "column '" + name + "' too small");
    const double mean = sum / n;
    const double sigma = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0));
    std::vector<std::optional<double>> scaled(c.size());
    for (size_t r = 0; r < c.size(); ++r) {
      if (c.IsValid(r)) scaled[r] = sigma == 0 ? 0.0 : (value(r) - mean) / sigma;
    }
    std::vector<Field> fields = out.schema().fields();
    std::vector<ColumnPtr> columns = out.columns();
    size_t idx = out.schema().Require(name);
    fields[idx].type = DataType::kFloat64;
    columns[idx] = MakeFloat64Column(scaled);
    out = Table(Schema(std::move(fields)), std::move(columns), out.num_rows());
  }
  return out;
}

namespace {

class Suite {
 public:
  Suite(Communicator& comm, const OracleSuiteOptions& opts)
      : comm_(comm), ctx_(comm), opts_(opts) {}

  using DistFn = std::function<Table(DistContext&, const std::vector<Table>&)>;
  using LocalFn = std::function<Table(const std::vector<Table>&)>;
  using MakeFn = std::function<std::vector<Table>(Rng&, size_t rows, size_t distinct)>;
  /// Extra property of the gathered output beyond oracle equality.
  using CheckFn = std::function<std::optional<std::string>(const Table&)>;

  void Run(const std::string& op, const MakeFn& make, const DistFn& dist, const LocalFn& local,
           double tol, const CheckFn& check = {}) {
    OracleCaseResult res{op, comm_.world_size(), 0, 0, {}};
    const int p = comm_.world_size();
    for (int i = 0; i < opts_.instances; ++i) {
      // Inputs are generated identically on every rank; each rank keeps the
      // rows it owns.
      Rng rng(MixSeed(MixSeed(opts_.seed, Fnv1a64(op)), static_cast<uint64_t>(i)));
      const auto rows = static_cast<size_t>(rng.Below(opts_.max_rows + 1));
      const auto distinct = std::max<size_t>(
          1, static_cast<size_t>(std::llround(opts_.uniqueness * static_cast<double>(rows))));
      std::vector<Table> global = make(rng, rows, distinct);
      std::vector<Table> mine;
      std::vector<Table> gathered_inputs;
      for (const Table& t : global) {
        auto owners = RandomOwners(t.num_rows(), p, rng);
        mine.push_back(OwnedRows(t, owners, comm_.rank()));
        gathered_inputs.push_back(GatheredOrder(t, owners, p));
      }
      Table out = dist(ctx_, mine);
      Table gathered = comm_.GatherTable(0, out);
      if (comm_.rank() != 0) continue;
      ++res.instances;
      std::optional<std::string> diff;
      try {
        diff = CanonicalDiff(gathered, local(gathered_inputs), tol);
        if (!diff && check) diff = check(gathered);
      } catch (const std::exception& e) {
        diff = std::string("oracle raised: ") + e.what();
      }
      if (diff) {
        if (res.failures++ == 0) res.first_failure = "instance " + std::to_string(i) + ": " + *diff;
      }
    }
    if (comm_.rank() == 0) results_.push_back(std::move(res));
  }

  std::vector<OracleCaseResult> TakeResults() { return std::move(results_); }

 private:
  Communicator& comm_;
  DistContext ctx_;
  OracleSuiteOptions opts_;
  std::vector<OracleCaseResult> results_;
};

Table Sample(Rng& rng, const Table& pool, size_t n) {
  std::vector<size_t> idx(pool.num_rows() == 0 ? 0 : n);
  for (auto& i : idx) i = static_cast<size_t>(rng.Below(pool.num_rows()));
  return Take(pool, idx);
}

std::vector<std::string> Pick(Rng& rng, const std::vector<std::vector<std::string>>& options) {
  return options[rng.Below(options.size())];
}

}  // namespace

std::vector<OracleCaseResult> RunOracleSuite(Communicator& comm, const OracleSuiteOptions& opts) {
  Suite suite(comm, opts);
  const double tol = opts.float_tol;

  auto two_tables = [](Rng& rng, size_t rows, size_t distinct) {
    RandomTableOptions o{.rows = rows, .distinct = distinct};
    Table l = RandomTable(rng, o);
    o.rows = static_cast<size_t>(rng.Below(rows + 1));
    Table r = Project(RandomTable(rng, o), {"k", "s", "y"});
    return std::vector<Table>{l, r};
  };
  for (JoinKind kind : {JoinKind::kInner, JoinKind::kLeft, JoinKind::kRight, JoinKind::kFullOuter}) {
    // Key choice is drawn per instance from the same rng stream on all ranks.
    auto keys = std::make_shared<std::vector<std::string>>();
    suite.Run(
        "dist_join/" + std::string(JoinKindName(kind)),
        [&, keys](Rng& rng, size_t rows, size_t distinct) {
          *keys = Pick(rng, {{"k"}, {"s"}, {"k", "s"}});
          return two_tables(rng, rows, distinct);
        },
        [kind, keys](DistContext& ctx, const std::vector<Table>& in) {
          return DistJoin(ctx, in[0], in[1], *keys, *keys, kind);
        },
        [kind, keys](const std::vector<Table>& in) {
          return LocalJoin(in[0], in[1], *keys, *keys, kind);
        },
        0.0);
  }

  {
    auto cols = std::make_shared<std::vector<std::string>>();
    auto asc = std::make_shared<std::vector<bool>>();
    suite.Run(
        "dist_sort",
        [cols, asc](Rng& rng, size_t rows, size_t distinct) {
          *cols = Pick(rng, {{"k"}, {"x"}, {"s", "k"}, {"b", "x"}, {"n", "y"}});
          asc->clear();
          for (size_t i = 0; i < cols->size(); ++i) asc->push_back(rng.Bernoulli(0.5));
          return std::vector<Table>{RandomTable(rng, {.rows = rows, .distinct = distinct})};
        },
        [cols, asc](DistContext& ctx, const std::vector<Table>& in) {
          return DistSort(ctx, in[0], *cols, *asc);
        },
        [cols, asc](const std::vector<Table>& in) { return OrderBy(in[0], *cols, *asc); }, 0.0,
        // Ranks are concatenated in order, so a sorted gathered sequence means
        // each rank is sorted and rank boundaries are monotone.
        [cols, asc](const Table& out) -> std::optional<std::string> {
          auto idx = ColumnIndices(out.schema(), *cols);
          std::unique_ptr<bool[]> flags(new bool[asc->size()]);
          for (size_t i = 0; i < asc->size(); ++i) flags[i] = (*asc)[i];
          std::span<const bool> a(flags.get(), asc->size());
          for (size_t r = 1; r < out.num_rows(); ++r) {
            if (CompareRows(out, r - 1, idx, out, r, idx, a) > 0) {
              return "gathered rows " + std::to_string(r - 1) + " and " + std::to_string(r) +
                     " out of order";
            }
          }
          return std::nullopt;
        });
  }

  {
    auto keys = std::make_shared<std::vector<std::string>>();
    const std::vector<Aggregation> aggs{
        {"n", AggKind::kSum},  {"n", AggKind::kProd}, {"s", AggKind::kCount},
        {"x", AggKind::kMean}, {"x", AggKind::kMin},  {"n", AggKind::kMax},
        {"y", AggKind::kSum},  {"y", AggKind::kProd}, {"x", AggKind::kMax},
        {"n", AggKind::kMean}, {"y", AggKind::kMin},  {"b", AggKind::kCount}};
    suite.Run(
        "dist_groupby_aggregate",
        [keys](Rng& rng, size_t rows, size_t distinct) {
          *keys = Pick(rng, {{"k"}, {"s"}, {"k", "b"}, {}});
          return std::vector<Table>{RandomTable(rng, {.rows = rows, .distinct = distinct})};
        },
        [keys, aggs](DistContext& ctx, const std::vector<Table>& in) {
          return DistGroupByAggregate(ctx, in[0], *keys, aggs);
        },
        [keys, aggs](const std::vector<Table>& in) { return GroupByAggregate(in[0], *keys, aggs); },
        tol);
  }

  {
    auto subset = std::make_shared<std::optional<std::vector<std::string>>>();
    suite.Run(
        "dist_unique",
        [subset](Rng& rng, size_t rows, size_t distinct) {
          switch (rng.Below(3)) {
            case 0: *subset = std::nullopt; break;
            case 1: *subset = std::vector<std::string>{"k"}; break;
            default: *subset = std::vector<std::string>{"k", "s"}; break;
          }
          Table pool = RandomTable(rng, {.rows = distinct, .distinct = distinct});
          return std::vector<Table>{Sample(rng, pool, rows)};
        },
        [subset](DistContext& ctx, const std::vector<Table>& in) {
          return DistUnique(ctx, in[0], *subset);
        },
        [subset](const std::vector<Table>& in) { return Unique(in[0], *subset); }, 0.0);
  }

  for (SetOpKind kind : {SetOpKind::kUnion, SetOpKind::kIntersect, SetOpKind::kDifference}) {
    suite.Run(
        "dist_set_op/" + std::string(SetOpKindName(kind)),
        [](Rng& rng, size_t rows, size_t distinct) {
          Table pool = RandomTable(rng, {.rows = distinct, .distinct = distinct});
          Table a = Sample(rng, pool, rows);
          size_t nb = static_cast<size_t>(rng.Below(rows + 1));
          Table fresh = RandomTable(rng, {.rows = nb / 2, .distinct = distinct});
          Table b = Concat(std::vector<Table>{Sample(rng, pool, nb - nb / 2), fresh}, a.schema());
          return std::vector<Table>{a, b};
        },
        [kind](DistContext& ctx, const std::vector<Table>& in) {
          return DistSetOp(ctx, in[0], in[1], kind);
        },
        [kind](const std::vector<Table>& in) { return SetOp(in[0], in[1], kind); }, 0.0);
  }

  {
    auto col = std::make_shared<std::string>();
    suite.Run(
        "dist_isin",
        [col](Rng& rng, size_t rows, size_t distinct) {
          *col = rng.Bernoulli(0.5) ? "k" : "s";
          Table t = RandomTable(rng, {.rows = rows, .distinct = distinct});
          Table probe = RandomTable(
              rng, {.rows = static_cast<size_t>(rng.Below(distinct + 1)), .distinct = distinct});
          return std::vector<Table>{t, probe};
        },
        [col](DistContext& ctx, const std::vector<Table>& in) {
          return DistIsIn(ctx, in[0], *col, in[1], *col);
        },
        [col](const std::vector<Table>& in) { return IsIn(in[0], *col, in[1], *col); }, 0.0);
  }

  {
    const std::vector<std::string> cols{"y", "n"};
    suite.Run(
        "dist_standard_scale",
        [](Rng& rng, size_t rows, size_t distinct) {
          // At least a handful of rows so both columns have two values.
          return std::vector<Table>{
              RandomTable(rng, {.rows = std::max<size_t>(rows, 20), .distinct = distinct,
                                .null_prob = 0.02})};
        },
        [cols](DistContext& ctx, const std::vector<Table>& in) {
          return DistStandardScale(ctx, in[0], cols);
        },
        [cols](const std::vector<Table>& in) { return ReferenceStandardScale(in[0], cols); },
        tol);
  }
  return suite.TakeResults();
}

}  // namespace hptmt
