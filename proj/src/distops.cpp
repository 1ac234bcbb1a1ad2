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

#include "hptmt/distops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hptmt/rng.hpp"

namespace hptmt {

std::vector<int> HashDestinations(const Table& t, const std::vector<size_t>& cols,
                                  int world_size) {
  std::vector<int> dest(t.num_rows(), 0);
  if (world_size == 1) return dest;
  EncodedKeys keys(t, cols);
  const auto p = static_cast<uint64_t>(world_size);
  for (size_t i = 0; i < dest.size(); ++i) dest[i] = static_cast<int>(keys.hash(i) % p);
  return dest;
}

namespace {

std::vector<size_t> AllColumns(const Table& t) {
  std::vector<size_t> cols(t.num_columns());
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

Table ShuffleByHash(Communicator& comm, const Table& t, const std::vector<size_t>& cols) {
  return comm.ShuffleTable(t, HashDestinations(t, cols, comm.world_size()));
}

}  // namespace

Table DistJoin(DistContext& ctx, const Table& l, const Table& r,
               const std::vector<std::string>& on_l, const std::vector<std::string>& on_r,
               JoinKind kind) {
  // Argument errors are identical on every rank, so raise them before any
  // message is sent.
  (void)LocalJoin(Table::Empty(l.schema()), Table::Empty(r.schema()), on_l, on_r, kind);
  Table ls = ShuffleByHash(ctx.comm, l, ColumnIndices(l.schema(), on_l));
  Table rs = ShuffleByHash(ctx.comm, r, ColumnIndices(r.schema(), on_r));
  return LocalJoin(ls, rs, on_l, on_r, kind);
}

Table DistSort(DistContext& ctx, const Table& t, const std::vector<std::string>& cols,
               const std::vector<bool>& ascending) {
  (void)OrderBy(Table::Empty(t.schema()), cols, ascending);
  const int p = ctx.world_size();
  const auto key_idx = ColumnIndices(t.schema(), cols);
  std::vector<bool> asc_vec = ascending.empty() ? std::vector<bool>(cols.size(), true) : ascending;
  std::unique_ptr<bool[]> asc(new bool[asc_vec.size()]);
  for (size_t i = 0; i < asc_vec.size(); ++i) asc[i] = asc_vec[i];
  std::span<const bool> asc_span(asc.get(), asc_vec.size());

  // Sample without replacement: a partial Fisher-Yates over row indices.
  Rng rng(MixSeed(ctx.seed, static_cast<uint64_t>(ctx.rank())));
  std::vector<size_t> rows(t.num_rows());
  std::iota(rows.begin(), rows.end(), 0);
  const size_t k = std::min(t.num_rows(), kSortSamplePerRank);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + static_cast<size_t>(rng.Below(rows.size() - i));
    std::swap(rows[i], rows[j]);
  }
  rows.resize(k);
  Table sample = Take(Project(t, cols), rows);

  std::vector<Bytes> parts = ctx.comm.AllGather(SerializeTable(sample));
  std::vector<Table> samples;
  samples.reserve(parts.size());
  for (const auto& b : parts) samples.push_back(DeserializeTable(b));
  Table all = Concat(samples, sample.schema());

  std::vector<size_t> sample_cols(cols.size());
  std::iota(sample_cols.begin(), sample_cols.end(), 0);
  std::vector<size_t> order = SortIndices(all, sample_cols, asc_span);
  std::vector<size_t> splitters;
  if (!order.empty()) {
    for (int i = 1; i < p; ++i) {
      splitters.push_back(order[static_cast<size_t>(i) * order.size() / static_cast<size_t>(p)]);
    }
  }

  // Partition i takes keys in (s_{i-1}, s_i]: the number of splitters that
  // sort strictly before the key.
  std::vector<int> dest(t.num_rows(), 0);
  for (size_t r = 0; r < t.num_rows(); ++r) {
    auto it = std::partition_point(splitters.begin(), splitters.end(), [&](size_t s) {
      return CompareRows(all, s, sample_cols, t, r, key_idx, asc_span) < 0;
    });
    dest[r] = static_cast<int>(it - splitters.begin());
  }
  Table moved = ctx.comm.ShuffleTable(t, dest);
  return OrderBy(moved, cols, ascending);
}

Table DistGroupByAggregate(DistContext& ctx, const Table& t, const std::vector<std::string>& keys,
                           const std::vector<Aggregation>& aggs) {
  // Validates names, types and result names exactly as the local operator.
  Table shape = GroupByAggregate(Table::Empty(t.schema()), keys, aggs);

  // Work table: keys, then one source column per aggregate. Mean sources are
  // widened to float64 so the partial sum matches the local accumulation.
  std::vector<Field> fields;
  std::vector<ColumnPtr> columns;
  for (const auto& k : keys) {
    size_t idx = t.schema().Require(k);
    fields.push_back(t.schema().field(idx));
    columns.push_back(t.column_ptr(idx));
  }
  auto source_name = [](size_t i) { return "\x01" "a" + std::to_string(i); };
  std::vector<Aggregation> partial_aggs;
  for (size_t i = 0; i < aggs.size(); ++i) {
    const Column& src = t.column(aggs[i].column);
    ColumnPtr c = t.column_ptr(t.schema().Require(aggs[i].column));
    if (aggs[i].kind == AggKind::kMean) c = CastColumn(src, DataType::kFloat64);
    fields.push_back({source_name(i), c->type()});
    columns.push_back(std::move(c));
    if (aggs[i].kind == AggKind::kMean) {
      partial_aggs.push_back({source_name(i), AggKind::kSum});
      partial_aggs.push_back({source_name(i), AggKind::kCount});
    } else {
      partial_aggs.push_back({source_name(i), aggs[i].kind});
    }
  }
  Table work(Schema(std::move(fields)), std::move(columns), t.num_rows());
  Table partial = GroupByAggregate(work, keys, partial_aggs);

  std::vector<size_t> key_idx(keys.size());
  std::iota(key_idx.begin(), key_idx.end(), 0);
  Table moved = ShuffleByHash(ctx.comm, partial, key_idx);

  // Combine: counts add up, everything else reapplies its own aggregate.
  std::vector<Aggregation> combine_aggs;
  for (size_t j = 0; j < partial_aggs.size(); ++j) {
    AggKind kind = partial_aggs[j].kind == AggKind::kCount ? AggKind::kSum : partial_aggs[j].kind;
    combine_aggs.push_back({AggregateColumnName(partial_aggs[j]), kind});
  }
  Table combined = GroupByAggregate(moved, keys, combine_aggs);

  std::vector<ColumnPtr> out_cols(combined.columns().begin(),
                                  combined.columns().begin() + static_cast<long>(keys.size()));
  size_t j = keys.size();
  for (const auto& agg : aggs) {
    if (agg.kind != AggKind::kMean) {
      out_cols.push_back(combined.column_ptr(j++));
      continue;
    }
    const Column& sum = combined.column(j++);
    const Column& count = combined.column(j++);
    ColumnBuilder b(DataType::kFloat64);
    b.Reserve(combined.num_rows());
    for (size_t r = 0; r < combined.num_rows(); ++r) {
      int64_t n = count.GetInt64(r);
      if (n == 0) {
        b.AppendNull();
      } else {
        b.AppendFloat64(sum.GetFloat64(r) / static_cast<double>(n));
      }
    }
    out_cols.push_back(b.Finish());
  }
  return Table(shape.schema(), std::move(out_cols), combined.num_rows());
}

Table DistUnique(DistContext& ctx, const Table& t,
                 const std::optional<std::vector<std::string>>& subset) {
  auto cols = subset ? ColumnIndices(t.schema(), *subset) : AllColumns(t);
  Table moved = ShuffleByHash(ctx.comm, t, cols);
  return Unique(moved, subset);
}

Table DistSetOp(DistContext& ctx, const Table& a, const Table& b, SetOpKind kind) {
  (void)SetOp(Table::Empty(a.schema()), Table::Empty(b.schema()), kind);
  auto cols = AllColumns(a);
  Table as = ShuffleByHash(ctx.comm, a, cols);
  Table bs = ShuffleByHash(ctx.comm, b, cols);
  return SetOp(as, bs, kind);
}

Table DistIsIn(DistContext& ctx, const Table& t, const std::string& col, const Table& probe,
               const std::string& probe_col) {
  (void)IsIn(Table::Empty(t.schema()), col, Table::Empty(probe.schema()), probe_col);
  auto local = DistinctKeys(probe, probe_col);
  // Sorted so the payload does not depend on hash-set iteration order.
  std::vector<std::string> sorted(local.begin(), local.end());
  std::sort(sorted.begin(), sorted.end());
  ByteWriter w;
  w.PutU64(sorted.size());
  for (const auto& k : sorted) {
    w.PutU64(k.size());
    w.PutBytes(k);
  }

  std::unordered_set<std::string> global;
  for (const auto& part : ctx.comm.AllGather(w.Finish())) {
    ByteReader r(part);
    uint64_t n = r.GetU64();
    for (uint64_t i = 0; i < n; ++i) global.insert(r.GetString(r.GetU64()));
  }
  if (global.size() > ctx.probe_limit) {
    Raise(ErrorCode::kProbeTooLarge, std::to_string(global.size()) +
                                         " distinct probe keys exceed the limit of " +
                                         std::to_string(ctx.probe_limit));
  }
  return IsInKeys(t, col, global);
}

Table DistStandardScale(DistContext& ctx, const Table& t, const std::vector<std::string>& cols) {
  auto idx = ColumnIndices(t.schema(), cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (!IsNumeric(t.schema().field(idx[i]).type)) {
      Raise(ErrorCode::kWrongType, "cannot scale non-numeric column '" + cols[i] + "'");
    }
  }
  auto value = [&](const Column& c, size_t r) {
    return c.type() == DataType::kInt64 ? static_cast<double>(c.GetInt64(r)) : c.GetFloat64(r);
  };
  std::vector<double> moments(3 * idx.size(), 0.0);
  for (size_t i = 0; i < idx.size(); ++i) {
    const Column& c = t.column(idx[i]);
    for (size_t r = 0; r < c.size(); ++r) {
      if (!c.IsValid(r)) continue;
      double x = value(c, r);
      moments[3 * i] += 1.0;
      moments[3 * i + 1] += x;
      moments[3 * i + 2] += x * x;
    }
  }
  std::vector<double> global = ctx.comm.AllReduce(moments, ReduceOp::kSum);

  std::vector<Field> fields = t.schema().fields();
  std::vector<ColumnPtr> out = t.columns();
  for (size_t i = 0; i < idx.size(); ++i) {
    double n = global[3 * i];
    if (n < 2) {
      Raise(ErrorCode::kDegenerateColumn,
            "column '" + cols[i] + "' has " + std::to_string(static_cast<int64_t>(n)) +
                " non-null values globally");
    }
    double mean = global[3 * i + 1] / n;
    double sigma = std::sqrt(std::max(global[3 * i + 2] / n - mean * mean, 0.0));
    const Column& c = t.column(idx[i]);
    ColumnBuilder b(DataType::kFloat64);
    b.Reserve(c.size());
    for (size_t r = 0; r < c.size(); ++r) {
      if (!c.IsValid(r)) {
        b.AppendNull();
      } else {
        b.AppendFloat64(sigma == 0 ? 0.0 : (value(c, r) - mean) / sigma);
      }
    }
    fields[idx[i]].type = DataType::kFloat64;
    out[idx[i]] = b.Finish();
  }
  return Table(Schema(std::move(fields)), std::move(out), t.num_rows());
}

}  // namespace hptmt
