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

// Brute-force reference implementations of the local operators. They work on
// rows of Values with nested loops and ordered maps so they share no code
// paths with the hashed kernels under test.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hptmt/columnar.hpp"
#include "hptmt/localops.hpp"

namespace hptmt::oracle {

using Row = std::vector<Value>;

inline std::vector<Row> Rows(const Table& t) {
  std::vector<Row> out(t.num_rows());
  for (size_t r = 0; r < t.num_rows(); ++r) {
    for (size_t c = 0; c < t.num_columns(); ++c) out[r].push_back(t.column(c).GetValue(r));
  }
  return out;
}

inline Table FromRows(const Schema& s, const std::vector<Row>& rows) {
  std::vector<ColumnPtr> cols;
  for (size_t c = 0; c < s.size(); ++c) {
    ColumnBuilder b(s.field(c).type);
    for (const auto& row : rows) b.AppendValue(row[c]);
    cols.push_back(b.Finish());
  }
  return Table(s, std::move(cols), rows.size());
}

inline size_t Col(const Schema& s, const std::string& name) {
  for (size_t i = 0; i < s.size(); ++i) {
    if (s.field(i).name == name) return i;
  }
  throw std::runtime_error("oracle: no column " + name);
}

// Identity used by grouping and set operations: nulls are equal to each
// other, every NaN is the same value and -0.0 equals +0.0.
inline std::string Token(const Value& v) {
  switch (v.index()) {
    case 0: return "N";
    case 1: return "I" + std::to_string(std::get<int64_t>(v));
    case 2: {
      double d = std::get<double>(v);
      if (std::isnan(d)) return "Fnan";
      if (d == 0.0) d = 0.0;
      return "F" + std::to_string(std::bit_cast<uint64_t>(d));
    }
    case 3: return std::get<bool>(v) ? "B1" : "B0";
    default: {
      const auto& s = std::get<std::string>(v);
      return "S" + std::to_string(s.size()) + ":" + s;
    }
  }
}

inline std::string RowToken(const Row& row, const std::vector<size_t>& cols) {
  std::string out;
  for (size_t c : cols) out += Token(row[c]) + "|";
  return out;
}

inline std::vector<size_t> AllCols(const Schema& s) {
  std::vector<size_t> out(s.size());
  for (size_t i = 0; i < s.size(); ++i) out[i] = i;
  return out;
}

// Total order: null first, NaN above +inf.
inline int CellCmp(const Value& a, const Value& b) {
  if (IsNull(a) || IsNull(b)) return static_cast<int>(!IsNull(a)) - static_cast<int>(!IsNull(b));
  if (a.index() == 2) {
    double x = std::get<double>(a), y = std::get<double>(b);
    if (std::isnan(x) || std::isnan(y)) return static_cast<int>(std::isnan(x)) - static_cast<int>(std::isnan(y));
    return x < y ? -1 : (x > y ? 1 : 0);
  }
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

// Exact cell identity for comparing results: doubles by bit pattern, with any
// two NaNs considered the same.
inline bool SameCell(const Value& a, const Value& b) {
  if (a.index() != b.index()) return false;
  if (a.index() == 2) {
    double x = std::get<double>(a), y = std::get<double>(b);
    if (std::isnan(x) && std::isnan(y)) return true;
    return std::bit_cast<uint64_t>(x) == std::bit_cast<uint64_t>(y);
  }
  return a == b;
}

/// Row-by-row, cell-by-cell identity including order. Returns a description
/// of the first difference.
inline std::optional<std::string> ExactDiff(const Table& got, const Table& want) {
  if (!(got.schema() == want.schema())) {
    return "schema " + got.schema().ToString() + " vs " + want.schema().ToString();
  }
  if (got.num_rows() != want.num_rows()) {
    return "rows " + std::to_string(got.num_rows()) + " vs " + std::to_string(want.num_rows());
  }
  auto g = Rows(got);
  auto w = Rows(want);
  for (size_t r = 0; r < g.size(); ++r) {
    for (size_t c = 0; c < g[r].size(); ++c) {
      if (!SameCell(g[r][c], w[r][c])) {
        return "row " + std::to_string(r) + " column " + got.schema().field(c).name;
      }
    }
  }
  return std::nullopt;
}

inline Schema JoinSchema(const Schema& l, const Schema& r) {
  std::vector<Field> fields = l.fields();
  for (const auto& f : r.fields()) {
    bool clash = false;
    for (const auto& lf : l.fields()) clash = clash || lf.name == f.name;
    fields.push_back({clash ? "r_" + f.name : f.name, f.type});
  }
  return Schema(fields);
}

inline Table NestedLoopJoin(const Table& l, const Table& r, const std::vector<std::string>& on_l,
                            const std::vector<std::string>& on_r, JoinKind kind) {
  auto lr = Rows(l);
  auto rr = Rows(r);
  std::vector<size_t> lk, rk;
  for (const auto& n : on_l) lk.push_back(Col(l.schema(), n));
  for (const auto& n : on_r) rk.push_back(Col(r.schema(), n));
  auto matches = [&](const Row& a, const Row& b) {
    for (size_t k = 0; k < lk.size(); ++k) {
      if (IsNull(a[lk[k]]) || IsNull(b[rk[k]])) return false;
      if (Token(a[lk[k]]) != Token(b[rk[k]])) return false;
    }
    return true;
  };
  std::vector<Row> out;
  std::vector<bool> l_hit(lr.size(), false), r_hit(rr.size(), false);
  for (size_t i = 0; i < lr.size(); ++i) {
    for (size_t j = 0; j < rr.size(); ++j) {
      if (!matches(lr[i], rr[j])) continue;
      l_hit[i] = r_hit[j] = true;
      Row row = lr[i];
      row.insert(row.end(), rr[j].begin(), rr[j].end());
      out.push_back(std::move(row));
    }
  }
  if (kind == JoinKind::kLeft || kind == JoinKind::kFullOuter) {
    for (size_t i = 0; i < lr.size(); ++i) {
      if (l_hit[i]) continue;
      Row row = lr[i];
      row.resize(row.size() + r.num_columns());
      out.push_back(std::move(row));
    }
  }
  if (kind == JoinKind::kRight || kind == JoinKind::kFullOuter) {
    for (size_t j = 0; j < rr.size(); ++j) {
      if (r_hit[j]) continue;
      Row row(l.num_columns());
      row.insert(row.end(), rr[j].begin(), rr[j].end());
      out.push_back(std::move(row));
    }
  }
  return FromRows(JoinSchema(l.schema(), r.schema()), out);
}

template <typename Pred>
Table ScanSelect(const Table& t, Pred pred) {
  std::vector<Row> out;
  for (auto& row : Rows(t)) {
    if (pred(row)) out.push_back(row);
  }
  return FromRows(t.schema(), out);
}

inline Table ReferenceSort(const Table& t, const std::vector<std::string>& cols,
                           const std::vector<bool>& asc) {
  auto rows = Rows(t);
  std::vector<size_t> idx;
  for (const auto& c : cols) idx.push_back(Col(t.schema(), c));
  // Insertion sort: stable by construction.
  std::vector<Row> out;
  for (auto& row : rows) {
    size_t pos = out.size();
    while (pos > 0) {
      int c = 0;
      for (size_t k = 0; k < idx.size() && c == 0; ++k) {
        c = CellCmp(out[pos - 1][idx[k]], row[idx[k]]);
        if (!asc.empty() && !asc[k]) c = -c;
      }
      if (c <= 0) break;
      --pos;
    }
    out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos), row);
  }
  return FromRows(t.schema(), out);
}

/// nullopt when the int64 sum or product overflows.
inline std::optional<Table> AccumulateGroupBy(const Table& t, const std::vector<std::string>& keys,
                                              const std::vector<Aggregation>& aggs) {
  auto rows = Rows(t);
  std::vector<size_t> kidx;
  for (const auto& k : keys) kidx.push_back(Col(t.schema(), k));
  std::map<std::string, size_t> group_of;
  std::vector<std::vector<size_t>> members;
  for (size_t r = 0; r < rows.size(); ++r) {
    auto [it, fresh] = group_of.emplace(RowToken(rows[r], kidx), members.size());
    if (fresh) members.emplace_back();
    members[it->second].push_back(r);
  }

  std::vector<Field> fields;
  for (size_t k : kidx) fields.push_back(t.schema().field(k));
  for (const auto& a : aggs) {
    DataType in = t.schema().field(Col(t.schema(), a.column)).type;
    DataType type = a.kind == AggKind::kCount  ? DataType::kInt64
                    : a.kind == AggKind::kMean ? DataType::kFloat64
                                               : in;
    fields.push_back({a.column + "_" + std::string(AggKindName(a.kind)), type});
  }

  std::vector<Row> out;
  for (const auto& group : members) {
    Row row;
    for (size_t k : kidx) row.push_back(rows[group.front()][k]);
    for (const auto& a : aggs) {
      size_t c = Col(t.schema(), a.column);
      std::vector<Value> vals;
      for (size_t r : group) {
        if (!IsNull(rows[r][c])) vals.push_back(rows[r][c]);
      }
      if (a.kind == AggKind::kCount) {
        row.push_back(static_cast<int64_t>(vals.size()));
        continue;
      }
      if (vals.empty()) {
        row.push_back(std::monostate{});
        continue;
      }
      const bool is_int = vals.front().index() == 1;
      switch (a.kind) {
        case AggKind::kMin:
        case AggKind::kMax: {
          Value best = vals.front();
          for (const auto& v : vals) {
            int cmp = CellCmp(v, best);
            if ((a.kind == AggKind::kMin && cmp < 0) || (a.kind == AggKind::kMax && cmp > 0)) best = v;
          }
          row.push_back(best);
          break;
        }
        case AggKind::kMean: {
          double s = 0;
          for (const auto& v : vals) s += is_int ? static_cast<double>(std::get<int64_t>(v)) : std::get<double>(v);
          row.push_back(s / static_cast<double>(vals.size()));
          break;
        }
        default: {
          const bool sum = a.kind == AggKind::kSum;
          if (is_int) {
            int64_t acc = sum ? 0 : 1;
            for (const auto& v : vals) {
              int64_t x = std::get<int64_t>(v);
              if (sum ? __builtin_add_overflow(acc, x, &acc) : __builtin_mul_overflow(acc, x, &acc)) {
                return std::nullopt;
              }
            }
            row.push_back(acc);
          } else {
            double acc = sum ? 0.0 : 1.0;
            for (const auto& v : vals) acc = sum ? acc + std::get<double>(v) : acc * std::get<double>(v);
            row.push_back(acc);
          }
        }
      }
    }
    out.push_back(std::move(row));
  }
  return FromRows(Schema(fields), out);
}

inline Table HashSetOp(const Table& a, const Table& b, SetOpKind kind) {
  auto cols = AllCols(a.schema());
  auto ar = Rows(a);
  auto br = Rows(b);
  std::set<std::string> in_b, seen;
  for (const auto& row : br) in_b.insert(RowToken(row, cols));
  std::vector<Row> out;
  auto emit = [&](const Row& row) {
    if (seen.insert(RowToken(row, cols)).second) out.push_back(row);
  };
  for (const auto& row : ar) {
    bool present = in_b.count(RowToken(row, cols)) > 0;
    if (kind == SetOpKind::kUnion || (kind == SetOpKind::kIntersect) == present) emit(row);
  }
  if (kind == SetOpKind::kUnion) {
    for (const auto& row : br) emit(row);
  }
  return FromRows(a.schema(), out);
}

inline Table ReferenceUnique(const Table& t, const std::vector<std::string>& subset) {
  std::vector<size_t> cols;
  for (const auto& s : subset) cols.push_back(Col(t.schema(), s));
  if (subset.empty()) cols = AllCols(t.schema());
  std::set<std::string> seen;
  std::vector<Row> out;
  for (auto& row : Rows(t)) {
    if (seen.insert(RowToken(row, cols)).second) out.push_back(row);
  }
  return FromRows(t.schema(), out);
}

inline Table ReferenceIsIn(const Table& t, const std::string& col, const Table& probe,
                           const std::string& probe_col) {
  size_t c = Col(t.schema(), col);
  size_t pc = Col(probe.schema(), probe_col);
  std::set<std::string> keys;
  for (auto& row : Rows(probe)) {
    if (!IsNull(row[pc])) keys.insert(Token(row[pc]));
  }
  return ScanSelect(t, [&](const Row& row) { return !IsNull(row[c]) && keys.count(Token(row[c])) > 0; });
}

inline Table ReferenceDropNulls(const Table& t) {
  return ScanSelect(t, [](const Row& row) {
    return std::none_of(row.begin(), row.end(), [](const Value& v) { return IsNull(v); });
  });
}

}  // namespace hptmt::oracle
