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

#include "hptmt/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace hptmt {

void CsvOptions::Validate() const {
  auto d = static_cast<unsigned char>(delimiter);
  if (d < 0x20 || d > 0x7E || delimiter == '"') {
    Raise(ErrorCode::kInvalidArgument, "csv delimiter must be printable ASCII other than '\"'");
  }
}

std::optional<int64_t> ParseInt64(std::string_view s) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::optional<double> ParseFloat64(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<bool> ParseBool(std::string_view s) {
  auto eq = [&](std::string_view word) {
    if (s.size() != word.size()) return false;
    for (size_t i = 0; i < s.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(s[i])) != word[i]) return false;
    }
    return true;
  };
  if (eq("true")) return true;
  if (eq("false")) return false;
  return std::nullopt;
}

std::string FormatFloat64(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string out(buf, p);
  if (out.find_first_of(".e") == std::string::npos) out += ".0";
  return out;
}

namespace {

// Splits the whole input into records of raw fields. A record ends at LF or
// CRLF outside quotes; input ending right after a terminator has no extra
// empty record.
std::vector<std::vector<std::string>> Tokenize(std::string_view in, char delim) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  size_t i = 0;
  const size_t n = in.size();
  bool record_open = false;
  while (i < n) {
    char ch = in[i];
    record_open = true;
    if (ch == '"' && field.empty()) {
      // quoted field
      ++i;
      bool closed = false;
      while (i < n) {
        if (in[i] == '"') {
          if (i + 1 < n && in[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            ++i;
            closed = true;
            break;
          }
        } else {
          field.push_back(in[i++]);
        }
      }
      if (!closed) {
        Raise(ErrorCode::kUnclosedQuote,
              "unterminated quoted field in record " + std::to_string(records.size() + 1));
      }
      continue;
    }
    if (ch == delim) {
      record.push_back(std::move(field));
      field.clear();
      ++i;
    } else if (ch == '\n' || (ch == '\r' && i + 1 < n && in[i + 1] == '\n')) {
      record.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(record));
      record.clear();
      record_open = false;
      i += ch == '\r' ? 2 : 1;
    } else {
      field.push_back(ch);
      ++i;
    }
  }
  if (record_open) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

DataType InferType(const std::vector<std::vector<std::string>>& rows, size_t first, size_t col,
                   const std::string& null_token) {
  bool is_int = true;
  bool is_float = true;
  bool is_bool = true;
  for (size_t r = first; r < rows.size(); ++r) {
    const std::string& f = rows[r][col];
    if (f == null_token) continue;
    if (is_int && !ParseInt64(f)) is_int = false;
    if (is_float && !ParseFloat64(f)) is_float = false;
    if (is_bool && !ParseBool(f)) is_bool = false;
    if (!is_int && !is_float && !is_bool) break;
  }
  if (is_int) return DataType::kInt64;
  if (is_float) return DataType::kFloat64;
  if (is_bool) return DataType::kBool;
  return DataType::kUtf8;
}

}  // namespace

Table ReadCsvString(std::string_view text, const CsvOptions& opts) {
  opts.Validate();
  auto rows = Tokenize(text, opts.delimiter);
  if (rows.empty()) {
    return Table::Empty(opts.explicit_schema.value_or(Schema()));
  }
  const size_t width = opts.explicit_schema ? opts.explicit_schema->size() : rows[0].size();
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != width) {
      Raise(ErrorCode::kRaggedRow, "record " + std::to_string(r + 1) + " has " +
                                       std::to_string(rows[r].size()) + " fields, expected " +
                                       std::to_string(width));
    }
  }
  const size_t first = opts.has_header ? 1 : 0;

  std::vector<Field> fields;
  if (opts.explicit_schema) {
    fields = opts.explicit_schema->fields();
  } else {
    for (size_t c = 0; c < width; ++c) {
      std::string name = opts.has_header ? rows[0][c] : "c" + std::to_string(c);
      fields.push_back({std::move(name), InferType(rows, first, c, opts.null_token)});
    }
  }
  Schema schema(fields);

  std::vector<ColumnPtr> cols;
  for (size_t c = 0; c < width; ++c) {
    ColumnBuilder b(fields[c].type);
    b.Reserve(rows.size() - first);
    for (size_t r = first; r < rows.size(); ++r) {
      const std::string& f = rows[r][c];
      if (f == opts.null_token) {
        b.AppendNull();
        continue;
      }
      auto fail = [&]() {
        Raise(ErrorCode::kCastFailure, "record " + std::to_string(r + 1) + " column '" +
                                           fields[c].name + "': cannot parse '" + f + "' as " +
                                           std::string(DataTypeName(fields[c].type)));
      };
      switch (fields[c].type) {
        case DataType::kInt64: {
          auto v = ParseInt64(f);
          if (!v) fail();
          b.AppendInt64(*v);
          break;
        }
        case DataType::kFloat64: {
          auto v = ParseFloat64(f);
          if (!v) fail();
          b.AppendFloat64(*v);
          break;
        }
        case DataType::kBool: {
          auto v = ParseBool(f);
          if (!v) fail();
          b.AppendBool(*v);
          break;
        }
        case DataType::kUtf8:
          b.AppendString(f);
          break;
      }
    }
    cols.push_back(b.Finish());
  }
  return Table(std::move(schema), std::move(cols), rows.size() - first);
}

Table ReadCsv(std::istream& in, const CsvOptions& opts) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ReadCsvString(text, opts);
}

Table ReadCsvFile(const std::string& path, const CsvOptions& opts) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Raise(ErrorCode::kInvalidArgument, "cannot open " + path);
  return ReadCsv(in, opts);
}

namespace {

void WriteField(std::ostream& out, std::string_view s, char delim) {
  bool quote = s.find_first_of(std::string{delim, '"', '\n', '\r'}) != std::string_view::npos;
  if (!quote) {
    out << s;
    return;
  }
  out << '"';
  for (char ch : s) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

size_t WriteCsv(const Table& t, std::ostream& out, const CsvOptions& opts) {
  opts.Validate();
  const size_t ncols = t.num_columns();
  if (opts.has_header) {
    for (size_t c = 0; c < ncols; ++c) {
      if (c) out << opts.delimiter;
      WriteField(out, t.schema().field(c).name, opts.delimiter);
    }
    out << '\n';
  }
  for (size_t r = 0; r < t.num_rows(); ++r) {
    for (size_t c = 0; c < ncols; ++c) {
      if (c) out << opts.delimiter;
      const Column& col = t.column(c);
      if (!col.IsValid(r)) {
        out << opts.null_token;
        continue;
      }
      switch (col.type()) {
        case DataType::kInt64: out << col.GetInt64(r); break;
        case DataType::kFloat64: out << FormatFloat64(col.GetFloat64(r)); break;
        case DataType::kBool: out << (col.GetBool(r) ? "true" : "false"); break;
        case DataType::kUtf8: WriteField(out, col.GetString(r), opts.delimiter); break;
      }
    }
    out << '\n';
  }
  out.flush();
  if (!out) Raise(ErrorCode::kSinkFailure, "csv sink failed");
  return t.num_rows();
}

std::string WriteCsvString(const Table& t, const CsvOptions& opts) {
  std::ostringstream os;
  WriteCsv(t, os, opts);
  return os.str();
}

size_t WriteCsvFile(const Table& t, const std::string& path, const CsvOptions& opts) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Raise(ErrorCode::kSinkFailure, "cannot open " + path + " for writing");
  return WriteCsv(t, out, opts);
}

}  // namespace hptmt
