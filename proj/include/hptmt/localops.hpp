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

// Single-worker relational operators. Every operator is pure and returns a
// fresh table; output row order is fully determined by the inputs.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include "hptmt/columnar.hpp"

namespace hptmt {

enum class JoinKind { kInner, kLeft, kRight, kFullOuter };
enum class AggKind { kSum, kProd, kCount, kMean, kMin, kMax };
enum class SetOpKind { kUnion, kIntersect, kDifference };

std::string_view JoinKindName(JoinKind kind);
std::string_view AggKindName(AggKind kind);
std::string_view SetOpKindName(SetOpKind kind);

inline constexpr std::string_view kCollisionPrefix = "r_";

// --- select -----------------------------------------------------------------

using RowPredicate = std::function<bool(const Table&, size_t)>;

enum class CmpOp { kEq, kNe, kLt, kLe, kGt, kGe };

/// `col <op> value` under the total order. A null cell never satisfies the
/// comparison. Int64 and Float64 operands may be mixed.
RowPredicate Compare(std::string col, CmpOp op, Value value);
RowPredicate IsNotNull(std::string col);
RowPredicate And(RowPredicate a, RowPredicate b);
RowPredicate Or(RowPredicate a, RowPredicate b);

Table Select(const Table& t, const RowPredicate& pred);

/// Row indices where pred holds, in order.
std::vector<size_t> SelectIndices(const Table& t, const RowPredicate& pred);

// --- project / transform ----------------------------------------------------

/// Columns in `cols` order, optionally renamed, then prefixed.
/// Errors: kUnknownColumn, kDuplicateResultName, kInvalidArgument when
/// rename_to has the wrong length.
Table Project(const Table& t, const std::vector<std::string>& cols,
              const std::optional<std::vector<std::string>>& rename_to = std::nullopt,
              std::string_view prefix = {});

/// Renames every column; `names` must match the column count.
Table RenameColumns(const Table& t, const std::vector<std::string>& names);

struct CastTo {
  DataType to;
};
struct StripSymbols {};
using ColumnTransform = std::variant<CastTo, StripSymbols>;

/// Supported casts: int64<->float64, int64/float64/bool -> utf8, utf8 ->
/// int64/float64, and identity. Nulls stay null.
/// Errors: kCastFailure (names the row), kUnsupportedCast.
ColumnPtr CastColumn(const Column& col, DataType to);

/// Replaces `col` in place (same position and name).
/// Errors: kUnknownColumn, kCastFailure, kUnsupportedCast, kWrongType
/// (StripSymbols on a non-utf8 column).
Table TransformColumn(const Table& t, std::string_view col, const ColumnTransform& kind);

// --- join -------------------------------------------------------------------

/// Schema of l's columns followed by r's, with r names that collide with an l
/// name prefixed by "r_".
Schema JoinedSchema(const Schema& l, const Schema& r);

/// Hash join on canonical key bytes. Null keys never match. Output: matched
/// pairs in l order (r order within one l row), then unmatched l rows
/// (Left/FullOuter), then unmatched r rows (Right/FullOuter).
/// Errors: kKeyArityMismatch, kKeyTypeMismatch, kUnknownColumn.
Table LocalJoin(const Table& l, const Table& r, const std::vector<std::string>& on_l,
                const std::vector<std::string>& on_r, JoinKind kind);

Table CrossProduct(const Table& a, const Table& b);

// --- sort / group -----------------------------------------------------------

/// Stable sort; `ascending` empty means all ascending.
Table OrderBy(const Table& t, const std::vector<std::string>& cols,
              const std::vector<bool>& ascending = {});

struct Aggregation {
  std::string column;
  AggKind kind;
};

/// "<col>_<agg>" with the lowercase aggregate name.
std::string AggregateColumnName(const Aggregation& agg);

/// One row per distinct key (null keys group together), keys first, in order
/// of first appearance. Aggregates skip nulls; an all-null group yields null
/// (Count yields 0). Sum/Prod/Min/Max keep the input type, Count is int64,
/// Mean is float64.
/// Errors: kNonNumericAggregate, kOverflow (int64 sum/prod), kUnknownColumn.
Table GroupByAggregate(const Table& t, const std::vector<std::string>& keys,
                       const std::vector<Aggregation>& aggs);

// --- sets -------------------------------------------------------------------

/// Whole-row identity; first-appearance order. Errors: kSchemaMismatch.
Table SetOp(const Table& a, const Table& b, SetOpKind kind);

/// First occurrence per key over `subset` (default all columns).
Table Unique(const Table& t, const std::optional<std::vector<std::string>>& subset = std::nullopt);

/// Rows of t whose `col` value occurs among the non-null `probe_col` values.
/// Errors: kKeyTypeMismatch, kUnknownColumn.
Table IsIn(const Table& t, std::string_view col, const Table& probe, std::string_view probe_col);

/// Key bytes of the distinct non-null values of one column.
std::unordered_set<std::string> DistinctKeys(const Table& t, std::string_view col);

/// IsIn against precomputed key bytes.
Table IsInKeys(const Table& t, std::string_view col, const std::unordered_set<std::string>& keys);

// --- nulls ------------------------------------------------------------------

Table DropNulls(const Table& t,
                const std::optional<std::vector<std::string>>& subset = std::nullopt);

enum class NullMaskMode { kIsNull, kNotNull };

/// Non-null bool column.
ColumnPtr NullMask(const Table& t, std::string_view col, NullMaskMode mode);

/// Column indices for names; throws kUnknownColumn.
std::vector<size_t> ColumnIndices(const Schema& s, const std::vector<std::string>& names);

}  // namespace hptmt
