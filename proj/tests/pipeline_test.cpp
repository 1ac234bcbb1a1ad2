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

#include <gtest/gtest.h>

#include <set>

#include "hptmt/pipeline.hpp"
#include "suites.hpp"

namespace hptmt {
namespace {

PipelineConfig Small() {
  PipelineConfig cfg;
  cfg.n_drugs = 120;
  cfg.n_response_rows = 700;
  cfg.n_rna_rows = 100;
  cfg.net.hidden_dim = 16;
  cfg.train.epochs = 4;
  cfg.seed = 7;
  return cfg;
}

Table Gathered(const PipelineConfig& cfg, int p, Table SyntheticData::*which) {
  std::vector<Table> parts;
  for (int r = 0; r < p; ++r) parts.push_back(GenerateSynthetic(cfg, r, p).*which);
  return Concat(parts);
}

TEST(Synthetic, DeterministicPerRank) {
  PipelineConfig cfg = Small();
  for (auto which : {&SyntheticData::response, &SyntheticData::drug_feat_a,
                     &SyntheticData::drug_feat_b, &SyntheticData::rna}) {
    EXPECT_EQ(SerializeTable(GenerateSynthetic(cfg, 1, 3).*which),
              SerializeTable(GenerateSynthetic(cfg, 1, 3).*which));
  }
}

TEST(Synthetic, UnionIndependentOfWorldSize) {
  PipelineConfig cfg = Small();
  for (auto which : {&SyntheticData::response, &SyntheticData::drug_feat_a,
                     &SyntheticData::drug_feat_b, &SyntheticData::rna}) {
    Table one = Gathered(cfg, 1, which);
    EXPECT_EQ(SerializeTable(Gathered(cfg, 3, which)), SerializeTable(one));
    EXPECT_EQ(SerializeTable(Gathered(cfg, 4, which)), SerializeTable(one));
  }
}

TEST(Synthetic, DuplicatesOnlyWhenRequested) {
  PipelineConfig cfg = Small();
  Table rna = Gathered(cfg, 1, &SyntheticData::rna);
  EXPECT_GT(rna.num_rows(), Unique(rna).num_rows());
  cfg.dup_fraction = 0;
  rna = Gathered(cfg, 1, &SyntheticData::rna);
  EXPECT_EQ(rna.num_rows(), Unique(rna).num_rows());
}

TEST(Synthetic, ResponseCarriesSymbolsAndNulls) {
  PipelineConfig cfg = Small();
  Table resp = Gathered(cfg, 1, &SyntheticData::response);
  EXPECT_EQ(resp.num_rows(), cfg.n_response_rows);
  const Column& ids = resp.column("drug_id");
  size_t with_symbols = 0;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids.IsValid(i) && ids.GetString(i).find_first_not_of("NSC0123456789") != std::string::npos) {
      ++with_symbols;
    }
  }
  EXPECT_GT(with_symbols, 0u);
  EXPECT_GT(resp.column("growth").null_count() + resp.column("concentration").null_count(), 0u);
}

TEST(Config, Validation) {
  PipelineConfig cfg;
  cfg.train_fraction = 1.5;
  EXPECT_THROW(cfg.Validate(), Error);
  cfg = PipelineConfig{};
  cfg.n_drugs = 0;
  EXPECT_THROW(cfg.Validate(), Error);
  EXPECT_EQ(PipelineConfig{}.feature_dim(), 29u);
}

TEST(Metrics, CsvShape) {
  EXPECT_EQ(MetricsCsvHeader(), "stage,rank,rows_in,rows_out,seconds");
  std::string row = MetricsCsvRow({"train", 2, 10, 9, 0.5});
  EXPECT_EQ(row.rfind("train,2,10,9,", 0), 0u);
}

TEST(Pipeline, FinalTableIndependentOfWorldSize) {
  PipelineConfig cfg = Small();
  auto one = testing::RunPipelineThreads(1, cfg);
  ASSERT_GT(one.final_table.num_rows(), 0u);
  EXPECT_EQ(one.loss.size(), 4u);
  for (int p : {2, 3}) {
    auto run = testing::RunPipelineThreads(p, cfg);
    auto diff = CanonicalDiff(run.final_table, one.final_table, 1e-12);
    EXPECT_FALSE(diff) << "p=" << p << ": " << *diff;
    EXPECT_EQ(run.rna_unique.num_rows(), Unique(run.rna_unique).num_rows());
  }
}

TEST(Pipeline, FinalTableSortedAndComplete) {
  PipelineConfig cfg = Small();
  auto run = testing::RunPipelineThreads(2, cfg);
  const Table& t = run.final_table;
  EXPECT_EQ(t.schema().field(0).name, "row_id");
  EXPECT_EQ(t.schema().field(t.num_columns() - 1).name, "growth");
  EXPECT_EQ(t.num_columns(), 3 + cfg.feature_dim());
  for (size_t i = 1; i < t.num_rows(); ++i) {
    ASSERT_LT(t.column(0).GetInt64(i - 1), t.column(0).GetInt64(i));
  }
  for (const auto& col : t.columns()) EXPECT_EQ(col->null_count(), 0u);
}

TEST(Pipeline, ErrorsNameRankAndStage) {
  PipelineConfig cfg = Small();
  cfg.train.lr = 1e12;
  try {
    testing::RunPipelineThreads(2, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonFiniteLoss);
    EXPECT_NE(std::string(e.what()).find("stage train"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace hptmt
