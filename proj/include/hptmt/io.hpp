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

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>

#include "hptmt/columnar.hpp"

namespace hptmt {

struct CsvOptions {
  char delimiter = ',';
  bool has_header = true;
  std::string null_token;
  /// When set, columns are parsed as these types instead of inferred.
  std::optional<Schema> explicit_schema;

  /// Throws kInvalidArgument for a delimiter that is not printable ASCII or
  /// is a double quote.
  void Validate() const;
};

/// RFC-4180-style reader. Without an explicit schema each column is typed as
/// the first of int64, float64, bool, utf8 that parses every non-null field.
///
/// Errors: kRaggedRow, kUnclosedQuote, kCastFailure (explicit schema only).
Table ReadCsv(std::istream& in, const CsvOptions& opts = {});
Table ReadCsvString(std::string_view text, const CsvOptions& opts = {});
Table ReadCsvFile(const std::string& path, const CsvOptions& opts = {});

/// Returns the number of data rows written. Throws kSinkFailure.
size_t WriteCsv(const Table& t, std::ostream& out, const CsvOptions& opts = {});
std::string WriteCsvString(const Table& t, const CsvOptions& opts = {});
size_t WriteCsvFile(const Table& t, const std::string& path, const CsvOptions& opts = {});

/// Shortest decimal text that parses back to the same double; always has a
/// '.', exponent, or non-finite spelling so it never reads back as int64.
std::string FormatFloat64(double v);

// Strict whole-field parsers shared with the cast operators.
std::optional<int64_t> ParseInt64(std::string_view s);
std::optional<double> ParseFloat64(std::string_view s);
std::optional<bool> ParseBool(std::string_view s);

}  // namespace hptmt
