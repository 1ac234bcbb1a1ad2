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

// Randomized equivalence checks between every distributed operator and its
// local counterpart applied to the gathered input.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hptmt/comm.hpp"
#include "hptmt/rng.hpp"

namespace hptmt {

struct RandomTableOptions {
  size_t rows = 100;
  /// Number of distinct values in the key columns k and s.
  size_t distinct = 10;
  double null_prob = 0.05;
  /// Chance that an x cell is NaN, -0.0 or an infinity.
  double special_prob = 0.05;
};

/// Columns: k int64 key, s utf8 key, x float64 (with specials), y float64
/// (finite), n int64 in [-3, 3], b bool.
Table RandomTable(Rng& rng, const RandomTableOptions& opts);

/// Random owner rank per row; occasionally all rows on one rank.
std::vector<int> RandomOwners(size_t rows, int world_size, Rng& rng);

/// Rows owned by `rank`, in row order.
Table OwnedRows(const Table& t, const std::vector<int>& owners, int rank);

/// What gathering the partitions in rank order produces.
Table GatheredOrder(const Table& t, const std::vector<int>& owners, int world_size);

/// Reference z-score with sequential sums, same null and sigma rules as
/// DistStandardScale.
Table ReferenceStandardScale(const Table& t, const std::vector<std::string>& cols);

struct OracleCaseResult {
  std::string op;
  int world_size = 1;
  int instances = 0;
  int failures = 0;
  std::string first_failure;
};

struct OracleSuiteOptions {
  int instances = 100;
  size_t max_rows = 1000;
  double uniqueness = 0.10;
  double float_tol = 1e-12;
  uint64_t seed = 1;
};

/// Collective. Results are complete on rank 0 and empty elsewhere.
std::vector<OracleCaseResult> RunOracleSuite(Communicator& comm, const OracleSuiteOptions& opts);

}  // namespace hptmt
