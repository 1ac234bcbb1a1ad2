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

#include "hptmt/localops.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "hptmt/io.hpp"

namespace hptmt {

std::string_view JoinKindName(JoinKind kind) {
  switch (kind) {
    case JoinKind::kInner: return "inner";
    case JoinKind::kLeft: return "left";
    case JoinKind::kRight: return "right";
    case JoinKind::kFullOuter: return "full_outer";
  }
  return "?";
}

std::string_view AggKindName(AggKind kind) {
  switch (kind) {
    case AggKind::kSum: return "sum";
    case AggKind::kProd: return "prod";
    case AggKind::kCount: return "count";
    case AggKind::kMean: return "mean";
    case AggKind::kMin: return "min";
    case AggKind::kMax: return "max";
  }
  return "?";
}

std::string_view SetOpKindName(SetOpKind kind) {
  switch (kind) {
    case SetOpKind::kUnion: return "union";
    case SetOpKind::kIntersect: return "intersect";
    case SetOpKind::kDifference: return "difference";
  }
  return "?";
}

std::vector<size_t> ColumnIndices(const Schema& s, const std::vector<std::string>& names) {
  std::vector<size_t> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(s.Require(n));
  return out;
}

namespace {

std::vector<size_t> AllColumns(const Table& t) {
  std::vector<size_t> cols(t.num_columns());
  std::iota(cols.begin(), cols.end(), 0);
  return cols;
}

// Orders a cell against a literal; only called on valid cells.
int CompareToValue(const Column& c, size_t row, const Value& v) {
  auto three_way = [](auto x, auto y) { return x < y ? -1 : (x > y ? 1 : 0); };
  switch (c.type()) {
    case DataType::kInt64:
      if (auto* i = std::get_if<int64_t>(&v)) return three_way(c.GetInt64(row), *i);
      if (auto* d = std::get_if<double>(&v)) {
        return three_way(static_cast<double>(c.GetInt64(row)), *d);
      }
      break;
    case DataType::kFloat64: {
      double x = c.GetFloat64(row);
      double y;
      if (auto* d = std::get_if<double>(&v)) {
        y = *d;
      } else if (auto* i = std::get_if<int64_t>(&v)) {
        y = static_cast<double>(*i);
      } else {
        break;
      }
      bool xn = std::isnan(x);
      bool yn = std::isnan(y);
      if (xn || yn) return static_cast<int>(xn) - static_cast<int>(yn);
      return three_way(x, y);
    }
    case DataType::kBool:
      if (auto* b = std::get_if<bool>(&v)) {
        return static_cast<int>(c.GetBool(row)) - static_cast<int>(*b);
      }
      break;
    case DataType::kUtf8:
      if (auto* s = std::get_if<std::string>(&v)) {
        int r = c.GetString(row).compare(*s);
        return r < 0 ? -1 : (r > 0 ? 1 : 0);
      }
      break;
  }
  Raise(ErrorCode::kWrongType, "predicate literal does not match column type " +
                                   std::string(DataTypeName(c.type())));
}

}  // namespace

// --- select -----------------------------------------------------------------

RowPredicate Compare(std::string col, CmpOp op, Value value) {
  return [col = std::move(col), op, value = std::move(value)](const Table& t, size_t row) {
    const Column& c = t.column(col);
    if (!c.IsValid(row) || IsNull(value)) return false;
    int r = CompareToValue(c, row, value);
    switch (op) {
      case CmpOp::kEq: return r == 0;
      case CmpOp::kNe: return r != 0;
      case CmpOp::kLt: return r < 0;
      case CmpOp::kLe: return r <= 0;
      case CmpOp::kGt: return r > 0;
      case CmpOp::kGe: return r >= 0;
    }
    return false;
  };
}

RowPredicate IsNotNull(std::string col) {
  return [col = std::move(col)](const Table& t, size_t row) {
    return t.column(col).IsValid(row);
  };
}

RowPredicate And(RowPredicate a, RowPredicate b) {
  return [a = std::move(a), b = std::move(b)](const Table& t, size_t row) {
    return a(t, row) && b(t, row);
  };
}

RowPredicate Or(RowPredicate a, RowPredicate b) {
  return [a = std::move(a), b = std::move(b)](const Table& t, size_t row) {
    return a(t, row) || b(t, row);
  };
}

std::vector<size_t> SelectIndices(const Table& t, const RowPredicate& pred) {
  std::vector<size_t> keep;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    if (pred(t, r)) keep.push_back(r);
  }
  return keep;
}

Table Select(const Table& t, const RowPredicate& pred) { return Take(t, SelectIndices(t, pred)); }

// --- project / transform ----------------------------------------------------

Table Project(const Table& t, const std::vector<std::string>& cols,
              const std::optional<std::vector<std::string>>& rename_to, std::string_view prefix) {
  if (rename_to && rename_to->size() != cols.size()) {
    Raise(ErrorCode::kInvalidArgument, "rename list length differs from column list");
  }
  std::vector<Field> fields;
  std::vector<ColumnPtr> columns;
  for (size_t i = 0; i < cols.size(); ++i) {
    size_t idx = t.schema().Require(cols[i]);
    std::string name = rename_to ? (*rename_to)[i] : cols[i];
    fields.push_back({std::string(prefix) + name, t.schema().field(idx).type});
    columns.push_back(t.column_ptr(idx));
  }
  return Table(Schema(std::move(fields)), std::move(columns), t.num_rows());
}

Table RenameColumns(const Table& t, const std::vector<std::string>& names) {
  if (names.size() != t.num_columns()) {
    Raise(ErrorCode::kInvalidArgument, "rename list length differs from column count");
  }
  std::vector<Field> fields;
  for (size_t i = 0; i < names.size(); ++i) fields.push_back({names[i], t.schema().field(i).type});
  return Table(Schema(std::move(fields)), t.columns(), t.num_rows());
}

ColumnPtr CastColumn(const Column& col, DataType to) {
  const DataType from = col.type();
  if (from == to) {
    ColumnBuilder b(to);
    for (size_t r = 0; r < col.size(); ++r) b.AppendFrom(col, r);
    return b.Finish();
  }
  auto unsupported = [&] {
    Raise(ErrorCode::kUnsupportedCast, "cannot cast " + std::string(DataTypeName(from)) +
                                           " to " + std::string(DataTypeName(to)));
  };
  bool supported = (from == DataType::kInt64 && to == DataType::kFloat64) ||
                   (from == DataType::kFloat64 && to == DataType::kInt64) ||
                   (to == DataType::kUtf8) ||
                   (from == DataType::kUtf8 && IsNumeric(to));
  if (!supported) unsupported();

  ColumnBuilder b(to);
  b.Reserve(col.size());
  for (size_t r = 0; r < col.size(); ++r) {
    if (!col.IsValid(r)) {
      b.AppendNull();
      continue;
    }
    auto fail = [&](const std::string& what) {
      Raise(ErrorCode::kCastFailure, "row " + std::to_string(r) + ": " + what);
    };
    switch (to) {
      case DataType::kFloat64:
        if (from == DataType::kInt64) {
          b.AppendFloat64(static_cast<double>(col.GetInt64(r)));
        } else {
          auto v = ParseFloat64(col.GetString(r));
          if (!v) fail("'" + std::string(col.GetString(r)) + "' is not a float64");
          b.AppendFloat64(*v);
        }
        break;
      case DataType::kInt64:
        if (from == DataType::kFloat64) {
          double d = col.GetFloat64(r);
          // 2^63 is exactly representable; anything at or above it overflows.
          if (!std::isfinite(d) || d != std::trunc(d) || d < -0x1p63 || d >= 0x1p63) {
            fail(FormatFloat64(d) + " is not an int64");
          }
          b.AppendInt64(static_cast<int64_t>(d));
        } else {
          auto v = ParseInt64(col.GetString(r));
          if (!v) fail("'" + std::string(col.GetString(r)) + "' is not an int64");
          b.AppendInt64(*v);
        }
        break;
      case DataType::kUtf8:
        switch (from) {
          case DataType::kInt64: b.AppendString(std::to_string(col.GetInt64(r))); break;
          case DataType::kFloat64: b.AppendString(FormatFloat64(col.GetFloat64(r))); break;
          case DataType::kBool: b.AppendString(col.GetBool(r) ? "true" : "false"); break;
          case DataType::kUtf8: break;
        }
        break;
      case DataType::kBool:
        unsupported();
    }
  }
  return b.Finish();
}

Table TransformColumn(const Table& t, std::string_view col, const ColumnTransform& kind) {
  const size_t idx = t.schema().Require(col);
  const Column& src = t.column(idx);
  ColumnPtr replaced;
  if (const auto* cast = std::get_if<CastTo>(&kind)) {
    replaced = CastColumn(src, cast->to);
  } else {
    if (src.type() != DataType::kUtf8) {
      Raise(ErrorCode::kWrongType, "strip_symbols needs a utf8 column, '" + std::string(col) +
                                       "' is " + std::string(DataTypeName(src.type())));
    }
    ColumnBuilder b(DataType::kUtf8);
    b.Reserve(src.size());
    std::string buf;
    for (size_t r = 0; r < src.size(); ++r) {
      if (!src.IsValid(r)) {
        b.AppendNull();
        continue;
      }
      buf.clear();
      for (char ch : src.GetString(r)) {
        auto u = static_cast<unsigned char>(ch);
        if (u < 0x80 && std::isalnum(u)) buf.push_back(ch);
      }
      b.AppendString(buf);
    }
    replaced = b.Finish();
  }
  std::vector<Field> fields = t.schema().fields();
  fields[idx].type = replaced->type();
  std::vector<ColumnPtr> cols = t.columns();
  cols[idx] = std::move(replaced);
  return Table(Schema(std::move(fields)), std::move(cols), t.num_rows());
}

// --- join -------------------------------------------------------------------

Schema JoinedSchema(const Schema& l, const Schema& r) {
  std::vector<Field> fields = l.fields();
  for (const auto& f : r.fields()) {
    std::string name = l.IndexOf(f.name) ? std::string(kCollisionPrefix) + f.name : f.name;
    fields.push_back({std::move(name), f.type});
  }
  return Schema(std::move(fields));  // throws kDuplicateResultName
}

namespace {

Table Assemble(const Table& l, std::span<const size_t> li, const Table& r,
               std::span<const size_t> ri) {
  Schema schema = JoinedSchema(l.schema(), r.schema());
  Table left = TakeOrNull(l, li);
  Table right = TakeOrNull(r, ri);
  std::vector<ColumnPtr> cols = left.columns();
  cols.insert(cols.end(), right.columns().begin(), right.columns().end());
  return Table(std::move(schema), std::move(cols), li.size());
}

// Dense group id per row plus CSR row lists per id, rows in input order.
struct Grouping {
  std::vector<int64_t> id_of_row;
  std::vector<size_t> first_row;  // per id
  std::vector<size_t> offsets;    // per id, size ids+1
  std::vector<size_t> rows;
};

Grouping GroupRows(const EncodedKeys& keys, bool skip_null_keys) {
  Grouping g;
  KeyIndex index(keys.size());
  g.id_of_row.assign(keys.size(), KeyIndex::kAbsent);
  for (size_t i = 0; i < keys.size(); ++i) {
    if (skip_null_keys && keys.has_null(i)) continue;
    auto [id, inserted] = index.Insert(keys.key(i), keys.hash(i));
    if (inserted) g.first_row.push_back(i);
    g.id_of_row[i] = id;
  }
  const size_t ngroups = g.first_row.size();
  g.offsets.assign(ngroups + 1, 0);
  for (int64_t id : g.id_of_row) {
    if (id != KeyIndex::kAbsent) ++g.offsets[static_cast<size_t>(id) + 1];
  }
  for (size_t k = 0; k < ngroups; ++k) g.offsets[k + 1] += g.offsets[k];
  g.rows.resize(g.offsets.back());
  std::vector<size_t> cursor(g.offsets.begin(), g.offsets.end() - 1);
  for (size_t i = 0; i < keys.size(); ++i) {
    int64_t id = g.id_of_row[i];
    if (id != KeyIndex::kAbsent) g.rows[cursor[static_cast<size_t>(id)]++] = i;
  }
  return g;
}

}  // namespace

Table LocalJoin(const Table& l, const Table& r, const std::vector<std::string>& on_l,
                const std::vector<std::string>& on_r, JoinKind kind) {
  if (on_l.size() != on_r.size()) {
    Raise(ErrorCode::kKeyArityMismatch, std::to_string(on_l.size()) + " left keys vs " +
                                            std::to_string(on_r.size()) + " right keys");
  }
  auto lcols = ColumnIndices(l.schema(), on_l);
  auto rcols = ColumnIndices(r.schema(), on_r);
  for (size_t k = 0; k < lcols.size(); ++k) {
    if (l.schema().field(lcols[k]).type != r.schema().field(rcols[k]).type) {
      Raise(ErrorCode::kKeyTypeMismatch, "join key '" + on_l[k] + "' vs '" + on_r[k] + "'");
    }
  }
  // Validate the output schema before doing any work.
  (void)JoinedSchema(l.schema(), r.schema());

  EncodedKeys lkeys(l, lcols);
  EncodedKeys rkeys(r, rcols);

  KeyIndex index(rkeys.size());
  Grouping build = GroupRows(rkeys, /*skip_null_keys=*/true);
  for (size_t id = 0; id < build.first_row.size(); ++id) {
    size_t row = build.first_row[id];
    index.Insert(rkeys.key(row), rkeys.hash(row));
  }

  std::vector<size_t> li;
  std::vector<size_t> ri;
  std::vector<uint8_t> r_matched(r.num_rows(), 0);
  std::vector<size_t> l_unmatched;
  for (size_t i = 0; i < l.num_rows(); ++i) {
    int64_t id = lkeys.has_null(i) ? KeyIndex::kAbsent : index.Find(lkeys.key(i), lkeys.hash(i));
    if (id == KeyIndex::kAbsent) {
      l_unmatched.push_back(i);
      continue;
    }
    for (size_t k = build.offsets[static_cast<size_t>(id)];
         k < build.offsets[static_cast<size_t>(id) + 1]; ++k) {
      li.push_back(i);
      ri.push_back(build.rows[k]);
      r_matched[build.rows[k]] = 1;
    }
  }
  if (kind == JoinKind::kLeft || kind == JoinKind::kFullOuter) {
    for (size_t i : l_unmatched) {
      li.push_back(i);
      ri.push_back(kNullRow);
    }
  }
  if (kind == JoinKind::kRight || kind == JoinKind::kFullOuter) {
    for (size_t j = 0; j < r.num_rows(); ++j) {
      if (!r_matched[j]) {
        li.push_back(kNullRow);
        ri.push_back(j);
      }
    }
  }
  return Assemble(l, li, r, ri);
}

Table CrossProduct(const Table& a, const Table& b) {
  std::vector<size_t> ai;
  std::vector<size_t> bi;
  ai.reserve(a.num_rows() * b.num_rows());
  bi.reserve(a.num_rows() * b.num_rows());
  for (size_t i = 0; i < a.num_rows(); ++i) {
    for (size_t j = 0; j < b.num_rows(); ++j) {
      ai.push_back(i);
      bi.push_back(j);
    }
  }
  return Assemble(a, ai, b, bi);
}

// --- sort / group -----------------------------------------------------------

Table OrderBy(const Table& t, const std::vector<std::string>& cols,
              const std::vector<bool>& ascending) {
  if (!ascending.empty() && ascending.size() != cols.size()) {
    Raise(ErrorCode::kInvalidArgument, "ascending flags must match sort columns");
  }
  auto idx = ColumnIndices(t.schema(), cols);
  std::vector<bool> asc = ascending.empty() ? std::vector<bool>(cols.size(), true) : ascending;
  std::unique_ptr<bool[]> flags(new bool[asc.size()]);
  for (size_t i = 0; i < asc.size(); ++i) flags[i] = asc[i];
  return Take(t, SortIndices(t, idx, std::span<const bool>(flags.get(), asc.size())));
}

std::string AggregateColumnName(const Aggregation& agg) {
  return agg.column + "_" + std::string(AggKindName(agg.kind));
}

namespace {

ColumnPtr AggregateColumn(const Column& src, AggKind kind, const Grouping& g,
                          const std::string& name) {
  const size_t ngroups = g.first_row.size();
  auto group_rows = [&](size_t id) {
    return std::span<const size_t>(g.rows.data() + g.offsets[id], g.offsets[id + 1] - g.offsets[id]);
  };

  if (kind == AggKind::kCount) {
    ColumnBuilder b(DataType::kInt64);
    b.Reserve(ngroups);
    for (size_t id = 0; id < ngroups; ++id) {
      int64_t n = 0;
      for (size_t r : group_rows(id)) n += src.IsValid(r) ? 1 : 0;
      b.AppendInt64(n);
    }
    return b.Finish();
  }
  if (!IsNumeric(src.type())) {
    Raise(ErrorCode::kNonNumericAggregate,
          std::string(AggKindName(kind)) + " of " + std::string(DataTypeName(src.type())) +
              " column for '" + name + "'");
  }

  if (kind == AggKind::kMin || kind == AggKind::kMax) {
    std::vector<size_t> pick(ngroups, kNullRow);
    for (size_t id = 0; id < ngroups; ++id) {
      for (size_t r : group_rows(id)) {
        if (!src.IsValid(r)) continue;
        if (pick[id] == kNullRow) {
          pick[id] = r;
          continue;
        }
        int c = CompareCells(src, r, src, pick[id]);
        if ((kind == AggKind::kMin && c < 0) || (kind == AggKind::kMax && c > 0)) pick[id] = r;
      }
    }
    ColumnBuilder b(src.type());
    b.Reserve(ngroups);
    for (size_t id = 0; id < ngroups; ++id) {
      if (pick[id] == kNullRow) {
        b.AppendNull();
      } else {
        b.AppendFrom(src, pick[id]);
      }
    }
    return b.Finish();
  }

  if (kind == AggKind::kMean) {
    ColumnBuilder b(DataType::kFloat64);
    b.Reserve(ngroups);
    for (size_t id = 0; id < ngroups; ++id) {
      double sum = 0;
      int64_t n = 0;
      for (size_t r : group_rows(id)) {
        if (!src.IsValid(r)) continue;
        sum += src.type() == DataType::kInt64 ? static_cast<double>(src.GetInt64(r))
                                              : src.GetFloat64(r);
        ++n;
      }
      if (n == 0) {
        b.AppendNull();
      } else {
        b.AppendFloat64(sum / static_cast<double>(n));
      }
    }
    return b.Finish();
  }

  // Sum / Prod keep the input type.
  const bool is_sum = kind == AggKind::kSum;
  ColumnBuilder b(src.type());
  b.Reserve(ngroups);
  for (size_t id = 0; id < ngroups; ++id) {
    bool any = false;
    if (src.type() == DataType::kInt64) {
      int64_t acc = is_sum ? 0 : 1;
      for (size_t r : group_rows(id)) {
        if (!src.IsValid(r)) continue;
        any = true;
        bool overflow = is_sum ? __builtin_add_overflow(acc, src.GetInt64(r), &acc)
                               : __builtin_mul_overflow(acc, src.GetInt64(r), &acc);
        if (overflow) Raise(ErrorCode::kOverflow, "int64 overflow computing '" + name + "'");
      }
      any ? b.AppendInt64(acc) : b.AppendNull();
    } else {
      double acc = is_sum ? 0.0 : 1.0;
      for (size_t r : group_rows(id)) {
        if (!src.IsValid(r)) continue;
        any = true;
        acc = is_sum ? acc + src.GetFloat64(r) : acc * src.GetFloat64(r);
      }
      any ? b.AppendFloat64(acc) : b.AppendNull();
    }
  }
  return b.Finish();
}

}  // namespace

Table GroupByAggregate(const Table& t, const std::vector<std::string>& keys,
                       const std::vector<Aggregation>& aggs) {
  auto key_cols = ColumnIndices(t.schema(), keys);
  std::vector<size_t> agg_cols;
  for (const auto& a : aggs) {
    size_t idx = t.schema().Require(a.column);
    if (a.kind != AggKind::kCount && !IsNumeric(t.schema().field(idx).type)) {
      Raise(ErrorCode::kNonNumericAggregate,
            std::string(AggKindName(a.kind)) + " over non-numeric column '" + a.column + "'");
    }
    agg_cols.push_back(idx);
  }
  EncodedKeys encoded(t, key_cols);
  Grouping g = GroupRows(encoded, /*skip_null_keys=*/false);

  Table key_part = Take(Project(t, keys), g.first_row);
  std::vector<Field> fields = key_part.schema().fields();
  std::vector<ColumnPtr> cols = key_part.columns();
  for (size_t i = 0; i < aggs.size(); ++i) {
    std::string name = AggregateColumnName(aggs[i]);
    ColumnPtr c = AggregateColumn(t.column(agg_cols[i]), aggs[i].kind, g, name);
    fields.push_back({std::move(name), c->type()});
    cols.push_back(std::move(c));
  }
  return Table(Schema(std::move(fields)), std::move(cols), g.first_row.size());
}

// --- sets -------------------------------------------------------------------

namespace {

std::vector<size_t> FirstOccurrences(const EncodedKeys& keys) {
  KeyIndex index(keys.size());
  std::vector<size_t> keep;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (index.Insert(keys.key(i), keys.hash(i)).second) keep.push_back(i);
  }
  return keep;
}

}  // namespace

Table SetOp(const Table& a, const Table& b, SetOpKind kind) {
  if (!(a.schema() == b.schema())) {
    Raise(ErrorCode::kSchemaMismatch,
          "set operation on " + a.schema().ToString() + " and " + b.schema().ToString());
  }
  auto cols = AllColumns(a);
  if (kind == SetOpKind::kUnion) {
    Table both = Concat(std::vector<Table>{a, b}, a.schema());
    return Take(both, FirstOccurrences(EncodedKeys(both, cols)));
  }
  EncodedKeys akeys(a, cols);
  EncodedKeys bkeys(b, cols);
  KeyIndex in_b(bkeys.size());
  for (size_t j = 0; j < bkeys.size(); ++j) in_b.Insert(bkeys.key(j), bkeys.hash(j));
  KeyIndex emitted(akeys.size());
  std::vector<size_t> keep;
  const bool want_present = kind == SetOpKind::kIntersect;
  for (size_t i = 0; i < akeys.size(); ++i) {
    bool present = in_b.Find(akeys.key(i), akeys.hash(i)) != KeyIndex::kAbsent;
    if (present != want_present) continue;
    if (emitted.Insert(akeys.key(i), akeys.hash(i)).second) keep.push_back(i);
  }
  return Take(a, keep);
}

Table Unique(const Table& t, const std::optional<std::vector<std::string>>& subset) {
  auto cols = subset ? ColumnIndices(t.schema(), *subset) : AllColumns(t);
  return Take(t, FirstOccurrences(EncodedKeys(t, cols)));
}

std::unordered_set<std::string> DistinctKeys(const Table& t, std::string_view col) {
  const size_t idx[] = {t.schema().Require(col)};
  EncodedKeys keys(t, idx);
  std::unordered_set<std::string> out;
  for (size_t i = 0; i < keys.size(); ++i) {
    if (!keys.has_null(i)) out.emplace(keys.key(i));
  }
  return out;
}

Table IsInKeys(const Table& t, std::string_view col, const std::unordered_set<std::string>& keys) {
  const size_t idx[] = {t.schema().Require(col)};
  EncodedKeys encoded(t, idx);
  std::vector<size_t> keep;
  for (size_t i = 0; i < encoded.size(); ++i) {
    if (!encoded.has_null(i) && keys.count(std::string(encoded.key(i)))) keep.push_back(i);
  }
  return Take(t, keep);
}

Table IsIn(const Table& t, std::string_view col, const Table& probe, std::string_view probe_col) {
  DataType a = t.schema().field(t.schema().Require(col)).type;
  DataType b = probe.schema().field(probe.schema().Require(probe_col)).type;
  if (a != b) {
    Raise(ErrorCode::kKeyTypeMismatch, "isin of " + std::string(DataTypeName(a)) + " against " +
                                           std::string(DataTypeName(b)));
  }
  return IsInKeys(t, col, DistinctKeys(probe, probe_col));
}

// --- nulls ------------------------------------------------------------------

Table DropNulls(const Table& t, const std::optional<std::vector<std::string>>& subset) {
  auto cols = subset ? ColumnIndices(t.schema(), *subset) : AllColumns(t);
  std::vector<size_t> keep;
  for (size_t r = 0; r < t.num_rows(); ++r) {
    bool ok = true;
    for (size_t c : cols) ok = ok && t.column(c).IsValid(r);
    if (ok) keep.push_back(r);
  }
  return Take(t, keep);
}

ColumnPtr NullMask(const Table& t, std::string_view col, NullMaskMode mode) {
  const Column& c = t.column(t.schema().Require(col));
  ColumnBuilder b(DataType::kBool);
  b.Reserve(c.size());
  for (size_t r = 0; r < c.size(); ++r) {
    b.AppendBool(c.IsValid(r) == (mode == NullMaskMode::kNotNull));
  }
  return b.Finish();
}

}  // namespace hptmt
