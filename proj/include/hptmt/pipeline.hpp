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

// End-to-end drug-response workflow on synthetic data: data engineering with
// distributed table operators, then data-parallel training of the response
// network, in one collective program.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hptmt/distops.hpp"
#include "hptmt/tensor.hpp"

namespace hptmt {

struct PipelineConfig {
  size_t n_drugs = 1006;
  size_t n_response_rows = 6000;
  /// Distinct expression profiles, one per drug, capped at n_drugs.
  size_t n_rna_rows = 920;
  /// Extra rna rows that duplicate an existing profile, as a fraction of
  /// n_rna_rows.
  double dup_fraction = 0.15;
  /// Probability that an id is rendered with punctuation.
  double symbol_fraction = 0.3;
  /// Share of the final rows used for training (prefix in row_id order).
  double train_fraction = 0.8;
  /// Probability of a null concentration or growth cell.
  double null_fraction = 0.01;
  size_t drug_a_dim = 8;
  size_t drug_b_dim = 8;
  size_t rna_dim = 12;
  /// in_dim is derived from the feature widths.
  NetConfig net{.hidden_dim = 64, .n_blocks = 2, .n_tail = 1};
  TrainConfig train{.lr = 0.01, .epochs = 30, .batch_size = 32};
  uint64_t seed = 42;

  void Validate() const;
  size_t feature_dim() const { return 1 + drug_a_dim + drug_b_dim + rna_dim; }
};

struct SyntheticData {
  Table response;
  Table drug_feat_a;
  Table drug_feat_b;
  Table rna;
};

/// Canonical drug id for index d ("NSC" + digits).
std::string DrugId(size_t d);

/// This rank's share of the synthetic datasets. Each global row is generated
/// from (seed, row index) alone and ranks own contiguous row ranges, so the
/// union over ranks does not depend on the world size.
SyntheticData GenerateSynthetic(const PipelineConfig& cfg, int rank, int world_size);

struct StageMetric {
  std::string stage;
  int rank = 0;
  size_t rows_in = 0;
  size_t rows_out = 0;
  double seconds = 0;
};

std::string MetricsCsvHeader();
std::string MetricsCsvRow(const StageMetric& m);

struct PipelineResult {
  /// Global loss per epoch.
  std::vector<double> loss_history;
  /// Global mean squared error on the held-out rows after training.
  double test_mse = 0;
  std::vector<StageMetric> metrics;
  /// This rank's slice of the assembled training table, ordered by row_id.
  Table final_table;
  /// This rank's slice of the deduplicated rna table.
  Table rna_unique;
  /// Names of the feature columns fed to the network, in order.
  std::vector<std::string> feature_columns;
  uint64_t param_digest = 0;
};

/// Collective. Errors are rethrown tagged with rank and stage.
PipelineResult RunPipeline(DistContext& ctx, const PipelineConfig& cfg);

}  // namespace hptmt
