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

// Columnar in-memory tables: typed columns with validity bitmaps, the
// canonical key encoding used for hashing and grouping, the total order used
// by every sort, and the binary table format.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "hptmt/bytes.hpp"
#include "hptmt/error.hpp"

namespace hptmt {

// The numeric codes are part of the table file format and the key encoding.
enum class DataType : uint8_t { kInt64 = 1, kFloat64 = 2, kBool = 3, kUtf8 = 4 };

std::string_view DataTypeName(DataType type);
bool IsNumeric(DataType type);

struct Field {
  std::string name;
  DataType type;

  bool operator==(const Field&) const = default;
};

class Schema {
 public:
  Schema() = default;
  /// Throws kDuplicateResultName if two fields share a name.
  explicit Schema(std::vector<Field> fields);
  Schema(std::initializer_list<Field> fields) : Schema(std::vector<Field>(fields)) {}

  size_t size() const { return fields_.size(); }
  const Field& field(size_t i) const { return fields_[i]; }
  const std::vector<Field>& fields() const { return fields_; }

  std::optional<size_t> IndexOf(std::string_view name) const;
  /// Like IndexOf but throws kUnknownColumn.
  size_t Require(std::string_view name) const;

  bool operator==(const Schema&) const = default;
  std::string ToString() const;

 private:
  std::vector<Field> fields_;
};

/// Packed LSB-first bit vector.
class Bitmap {
 public:
  Bitmap() = default;
  explicit Bitmap(size_t n, bool value = false);

  size_t size() const { return size_; }
  bool Get(size_t i) const { return (bytes_[i >> 3] >> (i & 7)) & 1; }
  void Set(size_t i, bool v) {
    if (v) {
      bytes_[i >> 3] |= static_cast<uint8_t>(1u << (i & 7));
    } else {
      bytes_[i >> 3] &= static_cast<uint8_t>(~(1u << (i & 7)));
    }
  }
  void PushBack(bool v);
  void Reserve(size_t n) { bytes_.reserve((n + 7) / 8); }
  size_t CountSet() const;

  /// ceil(size/8) bytes; padding bits are zero.
  const std::vector<uint8_t>& bytes() const { return bytes_; }

 private:
  std::vector<uint8_t> bytes_;
  size_t size_ = 0;
};

/// A single nullable cell, used by predicates, tests and the generic builder
/// path. std::monostate is null.
using Value = std::variant<std::monostate, int64_t, double, bool, std::string>;

inline bool IsNull(const Value& v) { return std::holds_alternative<std::monostate>(v); }

// Payload written into null slots when HPTMT_POISON_NULLS is defined. An
// operator that reads a null slot and emits it as a valid value leaves one of
// these in its output where ContainsPoison can find it.
inline constexpr int64_t kPoisonInt64 = 0x5A5A5A5A5A5A5A5ALL;
inline constexpr uint64_t kPoisonFloat64Bits = 0x7FF4DEADBEEF0BADULL;
inline constexpr uint8_t kPoisonBool = 0xA5;

class ColumnBuilder;

/// Immutable typed column. Cells whose validity bit is 0 have unspecified
/// payload; the typed accessors refuse to read them in debug builds or when
/// HPTMT_CHECK_NULL_READS is defined.
class Column {
 public:
  DataType type() const { return type_; }
  size_t size() const { return validity_.size(); }
  bool IsValid(size_t i) const { return validity_.Get(i); }
  size_t null_count() const { return size() - validity_.CountSet(); }
  const Bitmap& validity() const { return validity_; }

  int64_t GetInt64(size_t i) const {
    CheckRead(i, DataType::kInt64);
    return i64_[i];
  }
  double GetFloat64(size_t i) const {
    CheckRead(i, DataType::kFloat64);
    return f64_[i];
  }
  bool GetBool(size_t i) const {
    CheckRead(i, DataType::kBool);
    return b_[i] != 0;
  }
  std::string_view GetString(size_t i) const {
    CheckRead(i, DataType::kUtf8);
    return RawString(i);
  }
  /// Null-aware generic read.
  Value GetValue(size_t i) const;

  // Raw storage for bulk kernels that move payloads without interpreting
  // them. Payload at null positions is unspecified.
  std::span<const int64_t> int64_data() const { return i64_; }
  std::span<const double> float64_data() const { return f64_; }
  std::span<const uint8_t> bool_data() const { return b_; }
  std::span<const uint32_t> utf8_offsets() const { return offsets_; }
  std::string_view utf8_chars() const { return chars_; }
  std::string_view RawString(size_t i) const {
    return std::string_view(chars_).substr(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }

 private:
  friend class ColumnBuilder;
  explicit Column(DataType type) : type_(type) {}

  void CheckRead(size_t i, DataType expect) const {
#if defined(HPTMT_CHECK_NULL_READS) || !defined(NDEBUG)
    if (type_ != expect) Raise(ErrorCode::kWrongType, "typed read of wrong column type");
    if (!validity_.Get(i)) {
      Raise(ErrorCode::kInvalidArgument, "read of null cell at row " + std::to_string(i));
    }
#else
    (void)i;
    (void)expect;
#endif
  }

  DataType type_;
  Bitmap validity_;
  std::vector<int64_t> i64_;
  std::vector<double> f64_;
  std::vector<uint8_t> b_;
  std::vector<uint32_t> offsets_;
  std::string chars_;
};

using ColumnPtr = std::shared_ptr<const Column>;

class ColumnBuilder {
 public:
  explicit ColumnBuilder(DataType type);

  DataType type() const { return col_.type_; }
  size_t size() const { return col_.validity_.size(); }
  void Reserve(size_t n);

  void AppendInt64(int64_t v);
  void AppendFloat64(double v);
  void AppendBool(bool v);
  void AppendString(std::string_view v);
  void AppendNull();
  /// Throws kWrongType if a non-null value does not match the builder type.
  void AppendValue(const Value& v);
  /// Copies cell `row` of `src` (same type), including its null bit.
  void AppendFrom(const Column& src, size_t row);

  ColumnPtr Finish();

 private:
  Column col_;
};

/// Immutable table: schema plus equal-length columns.
class Table {
 public:
  Table() = default;
  /// Validates column count, types and lengths. `num_rows` is only consulted
  /// when there are no columns.
  Table(Schema schema, std::vector<ColumnPtr> columns, size_t num_rows = 0);

  static Table Empty(const Schema& schema);

  const Schema& schema() const { return schema_; }
  size_t num_rows() const { return num_rows_; }
  size_t num_columns() const { return columns_.size(); }
  const Column& column(size_t i) const { return *columns_[i]; }
  const Column& column(std::string_view name) const {
    return *columns_[schema_.Require(name)];
  }
  const ColumnPtr& column_ptr(size_t i) const { return columns_[i]; }
  const std::vector<ColumnPtr>& columns() const { return columns_; }

  std::string ToString(size_t max_rows = 20) const;

 private:
  Schema schema_;
  std::vector<ColumnPtr> columns_;
  size_t num_rows_ = 0;
};

// Literal construction, mostly for tests and examples.
ColumnPtr MakeInt64Column(const std::vector<std::optional<int64_t>>& values);
ColumnPtr MakeFloat64Column(const std::vector<std::optional<double>>& values);
ColumnPtr MakeBoolColumn(const std::vector<std::optional<bool>>& values);
ColumnPtr MakeUtf8Column(const std::vector<std::optional<std::string>>& values);
Table MakeTable(const std::vector<std::pair<std::string, ColumnPtr>>& columns);

/// Vertical concatenation. With no inputs the declared schema (or an empty
/// schema) gives an empty table. Throws kSchemaMismatch.
Table Concat(std::span<const Table> tables, const std::optional<Schema>& schema = {});

/// Row gather; duplicates allowed. Throws kIndexOutOfBounds.
Table Take(const Table& t, std::span<const size_t> indices);

/// Row gather where kNullRow produces an all-null row (outer-join padding).
inline constexpr size_t kNullRow = static_cast<size_t>(-1);
Table TakeOrNull(const Table& t, std::span<const size_t> indices);

/// Contiguous rows [offset, offset+length).
Table Slice(const Table& t, size_t offset, size_t length);

/// Side-by-side composition of equal-length tables; names must not collide.
Table HStack(const Table& left, const Table& right);

// --- canonical key encoding -------------------------------------------------

inline constexpr uint8_t kNullKeyTag = 0x00;
inline constexpr uint64_t kCanonicalNaNBits = 0x7FF8000000000000ULL;

/// NaN -> quiet NaN, -0.0 -> +0.0; everything else unchanged.
uint64_t CanonicalFloatBits(double v);

/// Appends the canonical encoding of `row` restricted to `cols`.
void AppendKeyBytes(const Table& t, std::span<const size_t> cols, size_t row,
                    std::string* out);

struct EncodedKey {
  std::string bytes;
  uint64_t hash;
};

EncodedKey EncodeAndHashKey(const Table& t, std::span<const size_t> cols, size_t row);

/// Key bytes and hashes for every row of a table, stored in one arena.
class EncodedKeys {
 public:
  EncodedKeys(const Table& t, std::span<const size_t> cols);

  size_t size() const { return hashes_.size(); }
  std::string_view key(size_t i) const {
    return std::string_view(arena_).substr(offsets_[i], offsets_[i + 1] - offsets_[i]);
  }
  uint64_t hash(size_t i) const { return hashes_[i]; }
  /// True if any key column is null in row i.
  bool has_null(size_t i) const { return has_null_[i] != 0; }

 private:
  std::string arena_;
  std::vector<size_t> offsets_;
  std::vector<uint64_t> hashes_;
  std::vector<uint8_t> has_null_;
};

/// Open-addressing map from key bytes to dense ids in insertion order. Keys
/// are borrowed views; their storage must outlive the index.
class KeyIndex {
 public:
  static constexpr int64_t kAbsent = -1;

  explicit KeyIndex(size_t expected = 16);

  /// Returns {id, inserted}.
  std::pair<int64_t, bool> Insert(std::string_view key, uint64_t hash);
  int64_t Find(std::string_view key, uint64_t hash) const;
  size_t size() const { return keys_.size(); }

 private:
  void Grow();

  std::vector<int64_t> slots_;
  std::vector<std::string_view> keys_;
  std::vector<uint64_t> hashes_;
  uint64_t mask_;
};

// --- total order ------------------------------------------------------------

/// Three-way compare of two cells of the same type: nulls first; Float64
/// ordered -inf < finite < +inf < NaN after canonicalization; Bool false <
/// true; Utf8 bytewise.
int CompareCells(const Column& a, size_t i, const Column& b, size_t j);

/// Lexicographic row compare over paired column lists; a false entry in
/// `ascending` reverses that column.
int CompareRows(const Table& a, size_t i, std::span<const size_t> a_cols, const Table& b,
                size_t j, std::span<const size_t> b_cols, std::span<const bool> ascending);

/// Row indices of a stable sort by `cols` under the total order.
std::vector<size_t> SortIndices(const Table& t, std::span<const size_t> cols,
                                std::span<const bool> ascending);

/// Order-insensitive equality: equal schemas and equal row multisets. With
/// float_tol > 0, Float64 cells a, b also match when
/// |a-b| <= float_tol * max(1, |a|, |b|).
bool CanonicalEqual(const Table& a, const Table& b, double float_tol = 0.0);

/// Same as CanonicalEqual but describes the first difference, or nullopt.
std::optional<std::string> CanonicalDiff(const Table& a, const Table& b,
                                         double float_tol = 0.0);

/// True if any valid cell carries a poison payload.
bool ContainsPoison(const Table& t);

// --- binary format ----------------------------------------------------------

Bytes SerializeTable(const Table& t);
void SerializeTable(const Table& t, ByteWriter& w);
/// Throws kCorruptData on malformed input.
Table DeserializeTable(std::span<const uint8_t> data);
Table DeserializeTable(ByteReader& r);

Bytes SerializeSchema(const Schema& s);

}  // namespace hptmt
