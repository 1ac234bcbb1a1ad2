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

#include "hptmt/columnar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace hptmt {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kIndexOutOfBounds: return "IndexOutOfBounds";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kDuplicateResultName: return "DuplicateResultName";
    case ErrorCode::kCastFailure: return "CastFailure";
    case ErrorCode::kUnsupportedCast: return "UnsupportedCast";
    case ErrorCode::kWrongType: return "WrongType";
    case ErrorCode::kKeyArityMismatch: return "KeyArityMismatch";
    case ErrorCode::kKeyTypeMismatch: return "KeyTypeMismatch";
    case ErrorCode::kNonNumericAggregate: return "NonNumericAggregate";
    case ErrorCode::kOverflow: return "Overflow";
    case ErrorCode::kCorruptData: return "CorruptData";
    case ErrorCode::kRaggedRow: return "RaggedRow";
    case ErrorCode::kUnclosedQuote: return "UnclosedQuote";
    case ErrorCode::kSinkFailure: return "SinkFailure";
    case ErrorCode::kRendezvousTimeout: return "RendezvousTimeout";
    case ErrorCode::kRankCollision: return "RankCollision";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kPeerClosed: return "PeerClosed";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kProtocolFault: return "ProtocolFault";
    case ErrorCode::kProbeTooLarge: return "ProbeTooLarge";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNullInNumericBridge: return "NullInNumericBridge";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
  }
  return "Unknown";
}

std::string_view DataTypeName(DataType type) {
  switch (type) {
    case DataType::kInt64: return "int64";
    case DataType::kFloat64: return "float64";
    case DataType::kBool: return "bool";
    case DataType::kUtf8: return "utf8";
  }
  return "?";
}

bool IsNumeric(DataType type) {
  return type == DataType::kInt64 || type == DataType::kFloat64;
}

// --- Schema -----------------------------------------------------------------

Schema::Schema(std::vector<Field> fields) : fields_(std::move(fields)) {
  std::unordered_set<std::string_view> seen;
  for (const auto& f : fields_) {
    if (!seen.insert(f.name).second) {
      Raise(ErrorCode::kDuplicateResultName, "duplicate column name '" + f.name + "'");
    }
  }
}

std::optional<size_t> Schema::IndexOf(std::string_view name) const {
  for (size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

size_t Schema::Require(std::string_view name) const {
  auto idx = IndexOf(name);
  if (!idx) Raise(ErrorCode::kUnknownColumn, "no column named '" + std::string(name) + "'");
  return *idx;
}

std::string Schema::ToString() const {
  std::string out = "(";
  for (size_t i = 0; i < fields_.size(); ++i) {
    if (i) out += ", ";
    out += fields_[i].name;
    out += ":";
    out += DataTypeName(fields_[i].type);
  }
  return out + ")";
}

// --- Bitmap -----------------------------------------------------------------

Bitmap::Bitmap(size_t n, bool value) : bytes_((n + 7) / 8, value ? 0xFF : 0x00), size_(n) {
  if (value && (n & 7)) bytes_.back() = static_cast<uint8_t>((1u << (n & 7)) - 1);
}

void Bitmap::PushBack(bool v) {
  if ((size_ & 7) == 0) bytes_.push_back(0);
  ++size_;
  Set(size_ - 1, v);
}

size_t Bitmap::CountSet() const {
  size_t n = 0;
  for (uint8_t b : bytes_) n += static_cast<size_t>(std::popcount(b));
  return n;
}

// --- Column -----------------------------------------------------------------

Value Column::GetValue(size_t i) const {
  if (!IsValid(i)) return std::monostate{};
  switch (type_) {
    case DataType::kInt64: return i64_[i];
    case DataType::kFloat64: return f64_[i];
    case DataType::kBool: return b_[i] != 0;
    case DataType::kUtf8: return std::string(RawString(i));
  }
  return std::monostate{};
}

ColumnBuilder::ColumnBuilder(DataType type) : col_(type) {
  if (type == DataType::kUtf8) col_.offsets_.push_back(0);
}

void ColumnBuilder::Reserve(size_t n) {
  col_.validity_.Reserve(n);
  switch (col_.type_) {
    case DataType::kInt64: col_.i64_.reserve(n); break;
    case DataType::kFloat64: col_.f64_.reserve(n); break;
    case DataType::kBool: col_.b_.reserve(n); break;
    case DataType::kUtf8: col_.offsets_.reserve(n + 1); break;
  }
}

void ColumnBuilder::AppendInt64(int64_t v) {
  if (col_.type_ != DataType::kInt64) Raise(ErrorCode::kWrongType, "expected int64 builder");
  col_.i64_.push_back(v);
  col_.validity_.PushBack(true);
}

void ColumnBuilder::AppendFloat64(double v) {
  if (col_.type_ != DataType::kFloat64) Raise(ErrorCode::kWrongType, "expected float64 builder");
  col_.f64_.push_back(v);
  col_.validity_.PushBack(true);
}

void ColumnBuilder::AppendBool(bool v) {
  if (col_.type_ != DataType::kBool) Raise(ErrorCode::kWrongType, "expected bool builder");
  col_.b_.push_back(v ? 1 : 0);
  col_.validity_.PushBack(true);
}

void ColumnBuilder::AppendString(std::string_view v) {
  if (col_.type_ != DataType::kUtf8) Raise(ErrorCode::kWrongType, "expected utf8 builder");
  col_.chars_.append(v);
  col_.offsets_.push_back(static_cast<uint32_t>(col_.chars_.size()));
  col_.validity_.PushBack(true);
}

void ColumnBuilder::AppendNull() {
  switch (col_.type_) {
#ifdef HPTMT_POISON_NULLS
    case DataType::kInt64: col_.i64_.push_back(kPoisonInt64); break;
    case DataType::kFloat64:
      col_.f64_.push_back(std::bit_cast<double>(kPoisonFloat64Bits));
      break;
    case DataType::kBool: col_.b_.push_back(kPoisonBool); break;
#else
    case DataType::kInt64: col_.i64_.push_back(0); break;
    case DataType::kFloat64: col_.f64_.push_back(0.0); break;
    case DataType::kBool: col_.b_.push_back(0); break;
#endif
    case DataType::kUtf8:
      col_.offsets_.push_back(static_cast<uint32_t>(col_.chars_.size()));
      break;
  }
  col_.validity_.PushBack(false);
}

void ColumnBuilder::AppendValue(const Value& v) {
  if (IsNull(v)) {
    AppendNull();
  } else if (auto* i = std::get_if<int64_t>(&v)) {
    AppendInt64(*i);
  } else if (auto* d = std::get_if<double>(&v)) {
    AppendFloat64(*d);
  } else if (auto* b = std::get_if<bool>(&v)) {
    AppendBool(*b);
  } else {
    AppendString(std::get<std::string>(v));
  }
}

void ColumnBuilder::AppendFrom(const Column& src, size_t row) {
  if (src.type() != col_.type_) Raise(ErrorCode::kWrongType, "AppendFrom type mismatch");
  if (!src.IsValid(row)) {
    AppendNull();
    return;
  }
  switch (col_.type_) {
    case DataType::kInt64: col_.i64_.push_back(src.i64_[row]); break;
    case DataType::kFloat64: col_.f64_.push_back(src.f64_[row]); break;
    case DataType::kBool: col_.b_.push_back(src.b_[row]); break;
    case DataType::kUtf8:
      col_.chars_.append(src.RawString(row));
      col_.offsets_.push_back(static_cast<uint32_t>(col_.chars_.size()));
      break;
  }
  col_.validity_.PushBack(true);
}

ColumnPtr ColumnBuilder::Finish() {
  auto out = std::make_shared<Column>(std::move(col_));
  col_ = Column(out->type_);
  if (col_.type_ == DataType::kUtf8) col_.offsets_.push_back(0);
  return out;
}

// --- Table ------------------------------------------------------------------

Table::Table(Schema schema, std::vector<ColumnPtr> columns, size_t num_rows)
    : schema_(std::move(schema)), columns_(std::move(columns)), num_rows_(num_rows) {
  if (columns_.size() != schema_.size()) {
    Raise(ErrorCode::kSchemaMismatch, "column count does not match schema");
  }
  if (!columns_.empty()) num_rows_ = columns_[0]->size();
  for (size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i]->type() != schema_.field(i).type) {
      Raise(ErrorCode::kSchemaMismatch, "column '" + schema_.field(i).name + "' has type " +
                                            std::string(DataTypeName(columns_[i]->type())));
    }
    if (columns_[i]->size() != num_rows_) {
      Raise(ErrorCode::kSchemaMismatch, "column '" + schema_.field(i).name + "' has " +
                                            std::to_string(columns_[i]->size()) +
                                            " rows, expected " + std::to_string(num_rows_));
    }
  }
}

Table Table::Empty(const Schema& schema) {
  std::vector<ColumnPtr> cols;
  for (const auto& f : schema.fields()) cols.push_back(ColumnBuilder(f.type).Finish());
  return Table(schema, std::move(cols));
}

namespace {

std::string FormatValue(const Value& v) {
  if (IsNull(v)) return "null";
  if (auto* i = std::get_if<int64_t>(&v)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&v)) {
    std::ostringstream os;
    os.precision(17);
    os << *d;
    return os.str();
  }
  if (auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return "\"" + std::get<std::string>(v) + "\"";
}

}  // namespace

std::string Table::ToString(size_t max_rows) const {
  std::string out = schema_.ToString() + " rows=" + std::to_string(num_rows_) + "\n";
  for (size_t r = 0; r < std::min(num_rows_, max_rows); ++r) {
    out += "  [";
    for (size_t c = 0; c < columns_.size(); ++c) {
      if (c) out += ", ";
      out += FormatValue(columns_[c]->GetValue(r));
    }
    out += "]\n";
  }
  if (num_rows_ > max_rows) out += "  ...\n";
  return out;
}

ColumnPtr MakeInt64Column(const std::vector<std::optional<int64_t>>& values) {
  ColumnBuilder b(DataType::kInt64);
  for (const auto& v : values) v ? b.AppendInt64(*v) : b.AppendNull();
  return b.Finish();
}

ColumnPtr MakeFloat64Column(const std::vector<std::optional<double>>& values) {
  ColumnBuilder b(DataType::kFloat64);
  for (const auto& v : values) v ? b.AppendFloat64(*v) : b.AppendNull();
  return b.Finish();
}

ColumnPtr MakeBoolColumn(const std::vector<std::optional<bool>>& values) {
  ColumnBuilder b(DataType::kBool);
  for (const auto& v : values) v ? b.AppendBool(*v) : b.AppendNull();
  return b.Finish();
}

ColumnPtr MakeUtf8Column(const std::vector<std::optional<std::string>>& values) {
  ColumnBuilder b(DataType::kUtf8);
  for (const auto& v : values) v ? b.AppendString(*v) : b.AppendNull();
  return b.Finish();
}

Table MakeTable(const std::vector<std::pair<std::string, ColumnPtr>>& columns) {
  std::vector<Field> fields;
  std::vector<ColumnPtr> cols;
  for (const auto& [name, col] : columns) {
    fields.push_back({name, col->type()});
    cols.push_back(col);
  }
  return Table(Schema(std::move(fields)), std::move(cols));
}

// --- row movement -----------------------------------------------------------

namespace {

ColumnPtr GatherColumn(const Column& src, std::span<const size_t> indices, bool allow_null_row) {
  ColumnBuilder b(src.type());
  b.Reserve(indices.size());
  for (size_t idx : indices) {
    if (allow_null_row && idx == kNullRow) {
      b.AppendNull();
    } else {
      b.AppendFrom(src, idx);
    }
  }
  return b.Finish();
}

Table Gather(const Table& t, std::span<const size_t> indices, bool allow_null_row) {
  for (size_t idx : indices) {
    if (idx >= t.num_rows() && !(allow_null_row && idx == kNullRow)) {
      Raise(ErrorCode::kIndexOutOfBounds, "row index " + std::to_string(idx) +
                                              " out of range for " +
                                              std::to_string(t.num_rows()) + " rows");
    }
  }
  std::vector<ColumnPtr> cols;
  cols.reserve(t.num_columns());
  for (const auto& c : t.columns()) cols.push_back(GatherColumn(*c, indices, allow_null_row));
  return Table(t.schema(), std::move(cols), indices.size());
}

}  // namespace

Table Take(const Table& t, std::span<const size_t> indices) {
  return Gather(t, indices, false);
}

Table TakeOrNull(const Table& t, std::span<const size_t> indices) {
  return Gather(t, indices, true);
}

Table Slice(const Table& t, size_t offset, size_t length) {
  if (offset > t.num_rows() || length > t.num_rows() - offset) {
    Raise(ErrorCode::kIndexOutOfBounds, "slice out of range");
  }
  std::vector<size_t> idx(length);
  std::iota(idx.begin(), idx.end(), offset);
  return Take(t, idx);
}

Table Concat(std::span<const Table> tables, const std::optional<Schema>& schema) {
  if (tables.empty()) return Table::Empty(schema.value_or(Schema()));
  const Schema& s = schema ? *schema : tables[0].schema();
  size_t total = 0;
  for (const auto& t : tables) {
    if (!(t.schema() == s)) {
      Raise(ErrorCode::kSchemaMismatch,
            "concat schema " + t.schema().ToString() + " vs " + s.ToString());
    }
    total += t.num_rows();
  }
  std::vector<ColumnPtr> cols;
  for (size_t c = 0; c < s.size(); ++c) {
    ColumnBuilder b(s.field(c).type);
    b.Reserve(total);
    for (const auto& t : tables) {
      const Column& src = t.column(c);
      for (size_t r = 0; r < t.num_rows(); ++r) b.AppendFrom(src, r);
    }
    cols.push_back(b.Finish());
  }
  return Table(s, std::move(cols), total);
}

Table HStack(const Table& left, const Table& right) {
  if (left.num_rows() != right.num_rows()) {
    Raise(ErrorCode::kSchemaMismatch, "hstack row counts differ");
  }
  std::vector<Field> fields = left.schema().fields();
  fields.insert(fields.end(), right.schema().fields().begin(), right.schema().fields().end());
  std::vector<ColumnPtr> cols = left.columns();
  cols.insert(cols.end(), right.columns().begin(), right.columns().end());
  return Table(Schema(std::move(fields)), std::move(cols), left.num_rows());
}

// --- key encoding -----------------------------------------------------------

uint64_t CanonicalFloatBits(double v) {
  if (std::isnan(v)) return kCanonicalNaNBits;
  if (v == 0.0) return 0;  // folds -0.0
  return std::bit_cast<uint64_t>(v);
}

namespace {

void PutLE(std::string* out, uint64_t v, int width) {
  for (int i = 0; i < width; ++i) out->push_back(static_cast<char>(v >> (8 * i)));
}

// Returns true if the cell was null.
bool AppendCell(const Column& c, size_t row, std::string* out) {
  if (!c.IsValid(row)) {
    out->push_back(static_cast<char>(kNullKeyTag));
    return true;
  }
  out->push_back(static_cast<char>(c.type()));
  switch (c.type()) {
    case DataType::kInt64:
      PutLE(out, static_cast<uint64_t>(c.GetInt64(row)), 8);
      break;
    case DataType::kFloat64:
      PutLE(out, CanonicalFloatBits(c.GetFloat64(row)), 8);
      break;
    case DataType::kBool:
      out->push_back(c.GetBool(row) ? 1 : 0);
      break;
    case DataType::kUtf8: {
      std::string_view s = c.GetString(row);
      PutLE(out, s.size(), 4);
      out->append(s);
      break;
    }
  }
  return false;
}

}  // namespace

void AppendKeyBytes(const Table& t, std::span<const size_t> cols, size_t row,
                    std::string* out) {
  for (size_t c : cols) AppendCell(t.column(c), row, out);
}

EncodedKey EncodeAndHashKey(const Table& t, std::span<const size_t> cols, size_t row) {
  EncodedKey k;
  AppendKeyBytes(t, cols, row, &k.bytes);
  k.hash = Fnv1a64(k.bytes);
  return k;
}

EncodedKeys::EncodedKeys(const Table& t, std::span<const size_t> cols) {
  const size_t n = t.num_rows();
  offsets_.reserve(n + 1);
  hashes_.reserve(n);
  has_null_.reserve(n);
  offsets_.push_back(0);
  for (size_t r = 0; r < n; ++r) {
    bool any_null = false;
    for (size_t c : cols) any_null |= AppendCell(t.column(c), r, &arena_);
    offsets_.push_back(arena_.size());
    has_null_.push_back(any_null ? 1 : 0);
    hashes_.push_back(Fnv1a64(key(r)));
  }
}

KeyIndex::KeyIndex(size_t expected) {
  size_t cap = 16;
  while (cap < expected * 2) cap <<= 1;
  slots_.assign(cap, kAbsent);
  mask_ = cap - 1;
  keys_.reserve(expected);
  hashes_.reserve(expected);
}

std::pair<int64_t, bool> KeyIndex::Insert(std::string_view key, uint64_t hash) {
  if ((keys_.size() + 1) * 2 > slots_.size()) Grow();
  for (uint64_t s = hash & mask_;; s = (s + 1) & mask_) {
    int64_t id = slots_[s];
    if (id == kAbsent) {
      id = static_cast<int64_t>(keys_.size());
      slots_[s] = id;
      keys_.push_back(key);
      hashes_.push_back(hash);
      return {id, true};
    }
    if (hashes_[id] == hash && keys_[id] == key) return {id, false};
  }
}

int64_t KeyIndex::Find(std::string_view key, uint64_t hash) const {
  for (uint64_t s = hash & mask_;; s = (s + 1) & mask_) {
    int64_t id = slots_[s];
    if (id == kAbsent) return kAbsent;
    if (hashes_[id] == hash && keys_[id] == key) return id;
  }
}

void KeyIndex::Grow() {
  std::vector<int64_t> slots(slots_.size() * 2, kAbsent);
  uint64_t mask = slots.size() - 1;
  for (size_t id = 0; id < keys_.size(); ++id) {
    uint64_t s = hashes_[id] & mask;
    while (slots[s] != kAbsent) s = (s + 1) & mask;
    slots[s] = static_cast<int64_t>(id);
  }
  slots_ = std::move(slots);
  mask_ = mask;
}

// --- total order ------------------------------------------------------------

namespace {

// Rank of a canonical double in the total order: finite and infinite values
// order numerically, NaN sorts above +inf.
int CompareDoubles(double x, double y) {
  bool xn = std::isnan(x);
  bool yn = std::isnan(y);
  if (xn || yn) return static_cast<int>(xn) - static_cast<int>(yn);
  if (x < y) return -1;
  if (x > y) return 1;
  return 0;  // includes -0.0 == +0.0
}

}  // namespace

int CompareCells(const Column& a, size_t i, const Column& b, size_t j) {
  bool av = a.IsValid(i);
  bool bv = b.IsValid(j);
  if (!av || !bv) return static_cast<int>(av) - static_cast<int>(bv);
  switch (a.type()) {
    case DataType::kInt64: {
      int64_t x = a.GetInt64(i);
      int64_t y = b.GetInt64(j);
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case DataType::kFloat64:
      return CompareDoubles(a.GetFloat64(i), b.GetFloat64(j));
    case DataType::kBool:
      return static_cast<int>(a.GetBool(i)) - static_cast<int>(b.GetBool(j));
    case DataType::kUtf8: {
      int c = a.GetString(i).compare(b.GetString(j));
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
  }
  return 0;
}

int CompareRows(const Table& a, size_t i, std::span<const size_t> a_cols, const Table& b,
                size_t j, std::span<const size_t> b_cols, std::span<const bool> ascending) {
  for (size_t k = 0; k < a_cols.size(); ++k) {
    int c = CompareCells(a.column(a_cols[k]), i, b.column(b_cols[k]), j);
    if (c != 0) return (ascending.empty() || ascending[k]) ? c : -c;
  }
  return 0;
}

std::vector<size_t> SortIndices(const Table& t, std::span<const size_t> cols,
                                std::span<const bool> ascending) {
  std::vector<size_t> idx(t.num_rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
    return CompareRows(t, x, cols, t, y, cols, ascending) < 0;
  });
  return idx;
}

namespace {

bool CellsMatch(const Column& a, size_t i, const Column& b, size_t j, double tol) {
  if (CompareCells(a, i, b, j) == 0) return true;
  if (tol <= 0 || a.type() != DataType::kFloat64) return false;
  if (!a.IsValid(i) || !b.IsValid(j)) return false;
  double x = a.GetFloat64(i);
  double y = b.GetFloat64(j);
  if (!std::isfinite(x) || !std::isfinite(y)) return false;
  double scale = std::max({1.0, std::fabs(x), std::fabs(y)});
  return std::fabs(x - y) <= tol * scale;
}

}  // namespace

std::optional<std::string> CanonicalDiff(const Table& a, const Table& b, double float_tol) {
  if (!(a.schema() == b.schema())) {
    return "schema " + a.schema().ToString() + " vs " + b.schema().ToString();
  }
  if (a.num_rows() != b.num_rows()) {
    return "row count " + std::to_string(a.num_rows()) + " vs " + std::to_string(b.num_rows());
  }
  std::vector<size_t> cols(a.num_columns());
  std::iota(cols.begin(), cols.end(), 0);
  auto ia = SortIndices(a, cols, {});
  auto ib = SortIndices(b, cols, {});
  for (size_t r = 0; r < ia.size(); ++r) {
    for (size_t c : cols) {
      if (!CellsMatch(a.column(c), ia[r], b.column(c), ib[r], float_tol)) {
        return "sorted row " + std::to_string(r) + " column '" + a.schema().field(c).name +
               "': " + FormatValue(a.column(c).GetValue(ia[r])) + " vs " +
               FormatValue(b.column(c).GetValue(ib[r]));
      }
    }
  }
  return std::nullopt;
}

bool CanonicalEqual(const Table& a, const Table& b, double float_tol) {
  return !CanonicalDiff(a, b, float_tol).has_value();
}

bool ContainsPoison(const Table& t) {
  for (const auto& c : t.columns()) {
    for (size_t r = 0; r < c->size(); ++r) {
      if (!c->IsValid(r)) continue;
      switch (c->type()) {
        case DataType::kInt64:
          if (c->GetInt64(r) == kPoisonInt64) return true;
          break;
        case DataType::kFloat64:
          if (std::bit_cast<uint64_t>(c->GetFloat64(r)) == kPoisonFloat64Bits) return true;
          break;
        case DataType::kBool:
          if (c->bool_data()[r] == kPoisonBool) return true;
          break;
        case DataType::kUtf8:
          break;
      }
    }
  }
  return false;
}

// --- binary format ----------------------------------------------------------

namespace {
constexpr char kTableMagic[4] = {'T', 'M', 'T', '1'};
}

void SerializeTable(const Table& t, ByteWriter& w) {
  w.PutBytes(std::string_view(kTableMagic, 4));
  w.PutU32(static_cast<uint32_t>(t.num_columns()));
  w.PutU64(t.num_rows());
  const size_t n = t.num_rows();
  for (size_t c = 0; c < t.num_columns(); ++c) {
    const Field& f = t.schema().field(c);
    const Column& col = t.column(c);
    w.PutU32(static_cast<uint32_t>(f.name.size()));
    w.PutBytes(f.name);
    w.PutU8(static_cast<uint8_t>(f.type));
    w.PutBytes(col.validity().bytes());
    switch (f.type) {
      case DataType::kInt64:
        for (size_t r = 0; r < n; ++r) w.PutI64(col.IsValid(r) ? col.GetInt64(r) : 0);
        break;
      case DataType::kFloat64:
        for (size_t r = 0; r < n; ++r) {
          if (col.IsValid(r)) {
            w.PutF64(col.GetFloat64(r));
          } else {
            w.PutU64(0);
          }
        }
        break;
      case DataType::kBool:
        for (size_t r = 0; r < n; ++r) w.PutU8(col.IsValid(r) && col.GetBool(r) ? 1 : 0);
        break;
      case DataType::kUtf8: {
        uint32_t off = 0;
        w.PutU32(0);
        for (size_t r = 0; r < n; ++r) {
          if (col.IsValid(r)) off += static_cast<uint32_t>(col.GetString(r).size());
          w.PutU32(off);
        }
        for (size_t r = 0; r < n; ++r) {
          if (col.IsValid(r)) w.PutBytes(col.GetString(r));
        }
        break;
      }
    }
  }
}

Bytes SerializeTable(const Table& t) {
  ByteWriter w;
  SerializeTable(t, w);
  return w.Finish();
}

Table DeserializeTable(ByteReader& r) {
  if (r.GetString(4) != std::string_view(kTableMagic, 4)) {
    Raise(ErrorCode::kCorruptData, "bad table magic");
  }
  uint32_t ncols = r.GetU32();
  uint64_t nrows = r.GetU64();
  std::vector<Field> fields;
  std::vector<ColumnPtr> cols;
  for (uint32_t c = 0; c < ncols; ++c) {
    uint32_t name_len = r.GetU32();
    std::string name = r.GetString(name_len);
    uint8_t code = r.GetU8();
    if (code < 1 || code > 4) Raise(ErrorCode::kCorruptData, "bad dtype code");
    auto type = static_cast<DataType>(code);
    auto bitmap = r.GetBytes((nrows + 7) / 8);
    auto valid = [&](uint64_t row) { return (bitmap[row >> 3] >> (row & 7)) & 1; };
    ColumnBuilder b(type);
    b.Reserve(nrows);
    switch (type) {
      case DataType::kInt64:
        for (uint64_t i = 0; i < nrows; ++i) {
          int64_t v = r.GetI64();
          valid(i) ? b.AppendInt64(v) : b.AppendNull();
        }
        break;
      case DataType::kFloat64:
        for (uint64_t i = 0; i < nrows; ++i) {
          double v = r.GetF64();
          valid(i) ? b.AppendFloat64(v) : b.AppendNull();
        }
        break;
      case DataType::kBool:
        for (uint64_t i = 0; i < nrows; ++i) {
          uint8_t v = r.GetU8();
          valid(i) ? b.AppendBool(v != 0) : b.AppendNull();
        }
        break;
      case DataType::kUtf8: {
        std::vector<uint32_t> offsets(nrows + 1);
        for (auto& o : offsets) o = r.GetU32();
        for (uint64_t i = 0; i < nrows; ++i) {
          if (offsets[i + 1] < offsets[i]) Raise(ErrorCode::kCorruptData, "bad utf8 offsets");
        }
        auto data = r.GetBytes(offsets[nrows] - offsets[0]);
        std::string_view chars(reinterpret_cast<const char*>(data.data()), data.size());
        for (uint64_t i = 0; i < nrows; ++i) {
          if (valid(i)) {
            b.AppendString(chars.substr(offsets[i] - offsets[0], offsets[i + 1] - offsets[i]));
          } else {
            b.AppendNull();
          }
        }
        break;
      }
    }
    fields.push_back({std::move(name), type});
    cols.push_back(b.Finish());
  }
  return Table(Schema(std::move(fields)), std::move(cols), nrows);
}

Table DeserializeTable(std::span<const uint8_t> data) {
  ByteReader r(data);
  Table t = DeserializeTable(r);
  if (!r.done()) Raise(ErrorCode::kCorruptData, "trailing bytes after table");
  return t;
}

Bytes SerializeSchema(const Schema& s) {
  ByteWriter w;
  w.PutU32(static_cast<uint32_t>(s.size()));
  for (const auto& f : s.fields()) {
    w.PutU32(static_cast<uint32_t>(f.name.size()));
    w.PutBytes(f.name);
    w.PutU8(static_cast<uint8_t>(f.type));
  }
  return w.Finish();
}

}  // namespace hptmt
