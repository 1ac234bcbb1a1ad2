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

// Distributed operators: one communication step plus a local operator. Each
// call is collective. Inputs and outputs are the rank-local partitions of a
// global table; gathering the outputs in rank order gives a table equal (as
// a row multiset) to the local operator applied to the gathered inputs.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hptmt/comm.hpp"
#include "hptmt/localops.hpp"

namespace hptmt {

struct DistContext {
  explicit DistContext(Communicator& c, uint64_t seed = 0x5EED5EED5EED5EEDULL)
      : comm(c), seed(seed) {}

  int rank() const { return comm.rank(); }
  int world_size() const { return comm.world_size(); }

  Communicator& comm;
  /// Seeds the per-rank sample in DistSort.
  uint64_t seed;
  /// Upper bound on the number of distinct global probe keys in DistIsIn.
  size_t probe_limit = 1'000'000;
};

inline constexpr size_t kSortSamplePerRank = 32;

/// dest[r] = hash(key bytes of row r) mod world_size.
std::vector<int> HashDestinations(const Table& t, const std::vector<size_t>& cols,
                                  int world_size);

/// Shuffle both sides by key hash, then LocalJoin.
Table DistJoin(DistContext& ctx, const Table& l, const Table& r,
               const std::vector<std::string>& on_l, const std::vector<std::string>& on_r,
               JoinKind kind);

/// Sample sort. Afterwards every rank is sorted and every key on rank i
/// precedes or equals every key on rank i+1.
Table DistSort(DistContext& ctx, const Table& t, const std::vector<std::string>& cols,
               const std::vector<bool>& ascending = {});

/// Partial aggregation, shuffle of the partials by key hash, then combine.
Table DistGroupByAggregate(DistContext& ctx, const Table& t, const std::vector<std::string>& keys,
                           const std::vector<Aggregation>& aggs);

/// Survivor per key is the first occurrence in (rank, row) order.
Table DistUnique(DistContext& ctx, const Table& t,
                 const std::optional<std::vector<std::string>>& subset = std::nullopt);

Table DistSetOp(DistContext& ctx, const Table& a, const Table& b, SetOpKind kind);

/// Allgathers the distinct probe keys; `t` never leaves its rank.
/// Errors: kProbeTooLarge when the global key set exceeds ctx.probe_limit.
Table DistIsIn(DistContext& ctx, const Table& t, const std::string& col, const Table& probe,
               const std::string& probe_col);

/// Z-scores `cols` with global population moments from one allreduce. Output
/// columns are float64 at the same positions; nulls stay null.
/// Errors: kWrongType, kDegenerateColumn (fewer than 2 global values).
Table DistStandardScale(DistContext& ctx, const Table& t, const std::vector<std::string>& cols);

}  // namespace hptmt
