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

#include "hptmt/pipeline.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "hptmt/rng.hpp"

namespace hptmt {

namespace {

constexpr size_t kLatentDim = 4;

// Stream tags keep the per-table generators independent.
enum : uint64_t {
  kTagLatent = 1,
  kTagResponse,
  kTagDrugA,
  kTagDrugB,
  kTagRna,
  kTagMixing,
  kTagSymbols,
};

Rng RowRng(uint64_t seed, uint64_t tag, uint64_t row) {
  return Rng(MixSeed(MixSeed(seed, tag), row));
}

std::array<double, kLatentDim> Latent(uint64_t seed, size_t d) {
  Rng rng = RowRng(seed, kTagLatent, d);
  std::array<double, kLatentDim> z{};
  for (double& v : z) v = rng.Normal();
  return z;
}

// Fixed random projection from the latent space to `dim` observed features.
std::vector<double> Mixing(uint64_t seed, uint64_t tag, size_t dim) {
  Rng rng = RowRng(seed, kTagMixing, tag);
  std::vector<double> m(dim * kLatentDim);
  for (double& v : m) v = rng.Normal() / std::sqrt(static_cast<double>(kLatentDim));
  return m;
}

double Observe(const std::vector<double>& mixing, size_t j,
               const std::array<double, kLatentDim>& z) {
  double acc = 0;
  for (size_t k = 0; k < kLatentDim; ++k) acc += mixing[j * kLatentDim + k] * z[k];
  return acc;
}

// Inserts one or two punctuation characters into an id.
std::string WithSymbols(const std::string& id, Rng& rng) {
  static constexpr std::string_view kSymbols = ".-_()#/ ,";
  std::string out = id;
  const int n = 1 + static_cast<int>(rng.Below(2));
  for (int i = 0; i < n; ++i) {
    size_t pos = static_cast<size_t>(rng.Below(out.size() + 1));
    out.insert(out.begin() + static_cast<long>(pos), kSymbols[rng.Below(kSymbols.size())]);
  }
  return out;
}

std::string MaybeSymbols(const std::string& id, double fraction, Rng& rng) {
  return rng.Bernoulli(fraction) ? WithSymbols(id, rng) : id;
}

std::pair<size_t, size_t> Block(size_t n, int rank, int world) {
  const auto r = static_cast<size_t>(rank);
  const auto p = static_cast<size_t>(world);
  return {r * n / p, (r + 1) * n / p};
}

// Feature tables cover most but not all drugs, so the inner joins and the
// common-drug intersection discard something.
bool InDrugA(size_t d) { return d % 10 != 3; }
bool InDrugB(size_t d) { return d % 10 != 7; }

std::vector<std::string> Names(const std::string& prefix, size_t n) {
  std::vector<std::string> out;
  for (size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

}  // namespace

void PipelineConfig::Validate() const {
  auto fraction = [](double f, const char* name) {
    if (!(f >= 0.0 && f <= 1.0)) {
      Raise(ErrorCode::kInvalidArgument, std::string(name) + " must be in [0, 1]");
    }
  };
  fraction(dup_fraction, "dup_fraction");
  fraction(symbol_fraction, "symbol_fraction");
  fraction(train_fraction, "train_fraction");
  fraction(null_fraction, "null_fraction");
  if (n_drugs < 1) Raise(ErrorCode::kInvalidArgument, "n_drugs must be at least 1");
}

std::string DrugId(size_t d) { return "NSC" + std::to_string(d); }

SyntheticData GenerateSynthetic(const PipelineConfig& cfg, int rank, int world_size) {
  cfg.Validate();
  const uint64_t seed = cfg.seed;
  SyntheticData out;

  // Response: target is a smooth function of the drug latent vector and the
  // log concentration, plus noise.
  {
    ColumnBuilder row_id(DataType::kInt64), drug(DataType::kUtf8), conc(DataType::kFloat64),
        noise(DataType::kFloat64), plate(DataType::kInt64), label(DataType::kUtf8),
        growth(DataType::kFloat64);
    auto [begin, end] = Block(cfg.n_response_rows, rank, world_size);
    for (size_t i = begin; i < end; ++i) {
      Rng rng = RowRng(seed, kTagResponse, i);
      const size_t d = static_cast<size_t>(rng.Below(cfg.n_drugs));
      const auto z = Latent(seed, d);
      const double c = rng.Uniform(-3.0, 0.0);
      const double g = std::tanh(z[0] + 0.5 * z[1]) * (1.0 + 0.5 * c) + 0.4 * z[2] * z[3] +
                       0.3 * std::sin(2.0 * z[1] + c) + 0.05 * rng.Normal();
      row_id.AppendInt64(static_cast<int64_t>(i));
      drug.AppendString(MaybeSymbols(DrugId(d), cfg.symbol_fraction, rng));
      rng.Bernoulli(cfg.null_fraction) ? conc.AppendNull() : conc.AppendFloat64(c);
      noise.AppendFloat64(rng.Normal());
      plate.AppendInt64(static_cast<int64_t>(rng.Below(96)));
      label.AppendString("batch" + std::to_string(rng.Below(8)));
      rng.Bernoulli(cfg.null_fraction) ? growth.AppendNull() : growth.AppendFloat64(g);
    }
    out.response = MakeTable({{"row_id", row_id.Finish()},
                              {"drug_id", drug.Finish()},
                              {"concentration", conc.Finish()},
                              {"noise", noise.Finish()},
                              {"plate", plate.Finish()},
                              {"batch_label", label.Finish()},
                              {"growth", growth.Finish()}});
  }

  auto [dbegin, dend] = Block(cfg.n_drugs, rank, world_size);
  {
    const auto mix = Mixing(seed, kTagDrugA, cfg.drug_a_dim);
    ColumnBuilder id(DataType::kUtf8);
    std::vector<ColumnBuilder> feats(cfg.drug_a_dim, ColumnBuilder(DataType::kFloat64));
    for (size_t d = dbegin; d < dend; ++d) {
      if (!InDrugA(d)) continue;
      Rng rng = RowRng(seed, kTagDrugA, d);
      const auto z = Latent(seed, d);
      id.AppendString(DrugId(d));
      for (size_t j = 0; j < cfg.drug_a_dim; ++j) {
        feats[j].AppendFloat64(Observe(mix, j, z) + 0.01 * rng.Normal());
      }
    }
    std::vector<std::pair<std::string, ColumnPtr>> cols{{"drug_id", id.Finish()}};
    auto names = Names("fa", cfg.drug_a_dim);
    for (size_t j = 0; j < feats.size(); ++j) cols.emplace_back(names[j], feats[j].Finish());
    out.drug_feat_a = MakeTable(cols);
  }
  {
    // Integer-coded descriptors; the pipeline casts them to float64.
    const auto mix = Mixing(seed, kTagDrugB, cfg.drug_b_dim);
    ColumnBuilder id(DataType::kUtf8);
    std::vector<ColumnBuilder> feats(cfg.drug_b_dim, ColumnBuilder(DataType::kInt64));
    for (size_t d = dbegin; d < dend; ++d) {
      if (!InDrugB(d)) continue;
      const auto z = Latent(seed, d);
      id.AppendString(DrugId(d));
      for (size_t j = 0; j < cfg.drug_b_dim; ++j) {
        feats[j].AppendInt64(std::llround(100.0 * Observe(mix, j, z)));
      }
    }
    std::vector<std::pair<std::string, ColumnPtr>> cols{{"drug_id", id.Finish()}};
    auto names = Names("fb", cfg.drug_b_dim);
    for (size_t j = 0; j < feats.size(); ++j) cols.emplace_back(names[j], feats[j].Finish());
    out.drug_feat_b = MakeTable(cols);
  }
  {
    // Base rows 0..n_base-1 hold one profile per drug; the remaining rows
    // copy a base row, possibly with a differently punctuated id.
    const auto mix = Mixing(seed, kTagRna, cfg.rna_dim);
    const size_t n_base = std::min(cfg.n_rna_rows, cfg.n_drugs);
    const auto n_dup = static_cast<size_t>(
        std::llround(cfg.dup_fraction * static_cast<double>(n_base)));
    ColumnBuilder id(DataType::kUtf8);
    std::vector<ColumnBuilder> feats(cfg.rna_dim, ColumnBuilder(DataType::kFloat64));
    auto [begin, end] = Block(n_base + n_dup, rank, world_size);
    for (size_t i = begin; i < end; ++i) {
      Rng rng = RowRng(seed, kTagRna, i);
      size_t base = i < n_base ? i : static_cast<size_t>(rng.Below(n_base));
      // Base row b profiles drug b; its noise comes from its own stream.
      Rng noise = RowRng(seed, kTagRna, base);
      const auto z = Latent(seed, base);
      Rng sym = RowRng(seed, kTagSymbols, i);
      id.AppendString(MaybeSymbols(DrugId(base), cfg.symbol_fraction, sym));
      for (size_t j = 0; j < cfg.rna_dim; ++j) {
        feats[j].AppendFloat64(std::tanh(Observe(mix, j, z)) + 0.01 * noise.Normal());
      }
    }
    std::vector<std::pair<std::string, ColumnPtr>> cols{{"drug_id", id.Finish()}};
    auto names = Names("rna", cfg.rna_dim);
    for (size_t j = 0; j < feats.size(); ++j) cols.emplace_back(names[j], feats[j].Finish());
    out.rna = MakeTable(cols);
  }
  return out;
}

std::string MetricsCsvHeader() { return "stage,rank,rows_in,rows_out,seconds"; }

std::string MetricsCsvRow(const StageMetric& m) {
  char seconds[32];
  std::snprintf(seconds, sizeof(seconds), "%.6f", m.seconds);
  return m.stage + "," + std::to_string(m.rank) + "," + std::to_string(m.rows_in) + "," +
         std::to_string(m.rows_out) + "," + seconds;
}

namespace {

class StageRunner {
 public:
  StageRunner(int rank, std::vector<StageMetric>* metrics) : rank_(rank), metrics_(metrics) {}

  // Runs one stage, records its metrics and tags any error with rank and
  // stage name.
  Table Run(const std::string& stage, size_t rows_in, const std::function<Table()>& fn) {
    size_t rows_out = 0;
    Table result;
    Time(stage, rows_in, [&] {
      result = fn();
      rows_out = result.num_rows();
    }, &rows_out);
    return result;
  }

  void Time(const std::string& stage, size_t rows_in, const std::function<void()>& fn,
            const size_t* rows_out) {
    auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const Error& e) {
      std::string what = e.what();
      auto colon = what.find(": ");
      Raise(e.code(), "rank " + std::to_string(rank_) + ", stage " + stage + ": " +
                          (colon == std::string::npos ? what : what.substr(colon + 2)));
    }
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    metrics_->push_back({stage, rank_, rows_in, rows_out ? *rows_out : rows_in, dt.count()});
  }

 private:
  int rank_;
  std::vector<StageMetric>* metrics_;
};

}  // namespace

PipelineResult RunPipeline(DistContext& ctx, const PipelineConfig& cfg) {
  cfg.Validate();
  PipelineResult result;
  StageRunner stage(ctx.rank(), &result.metrics);
  Communicator& comm = ctx.comm;

  // Stage 1: the communicator is already up; check the world agrees on it.
  stage.Time("init", 0, [&] {
    const int64_t size[] = {comm.world_size()};
    if (comm.AllReduce(std::span<const int64_t>(size), ReduceOp::kMin)[0] != comm.world_size()) {
      Raise(ErrorCode::kProtocolFault, "ranks disagree on the world size");
    }
  }, nullptr);

  SyntheticData data;
  Table generated = stage.Run("generate", 0, [&] {
    data = GenerateSynthetic(cfg, ctx.rank(), ctx.world_size());
    return data.response;
  });

  // Stage 2: data engineering.
  const std::vector<std::string> response_cols{"row_id", "drug_id", "concentration", "growth"};
  Table response = stage.Run("response_project", generated.num_rows(),
                             [&] { return Project(generated, response_cols); });
  response = stage.Run("response_strip_symbols", response.num_rows(),
                       [&] { return TransformColumn(response, "drug_id", StripSymbols{}); });
  response = stage.Run("response_drop_nulls", response.num_rows(),
                       [&] { return DropNulls(response); });
  response = stage.Run("response_scale", response.num_rows(), [&] {
    return DistStandardScale(ctx, response, {"concentration", "growth"});
  });

  Table drug = stage.Run("drug_join", data.drug_feat_a.num_rows() + data.drug_feat_b.num_rows(),
                         [&] {
    Table joined = DistJoin(ctx, data.drug_feat_a, data.drug_feat_b, {"drug_id"}, {"drug_id"},
                            JoinKind::kInner);
    std::vector<std::string> keep{"drug_id"};
    for (const auto& n : Names("fa", cfg.drug_a_dim)) keep.push_back(n);
    for (const auto& n : Names("fb", cfg.drug_b_dim)) keep.push_back(n);
    return Project(joined, keep);
  });
  drug = stage.Run("drug_cast", drug.num_rows(), [&] {
    Table t = drug;
    for (const auto& n : Names("fb", cfg.drug_b_dim)) {
      t = TransformColumn(t, n, CastTo{DataType::kFloat64});
    }
    return t;
  });
  drug = stage.Run("drug_scale", drug.num_rows(), [&] {
    std::vector<std::string> cols = Names("fa", cfg.drug_a_dim);
    for (const auto& n : Names("fb", cfg.drug_b_dim)) cols.push_back(n);
    return DistStandardScale(ctx, drug, cols);
  });

  Table rna = stage.Run("rna_strip_symbols", data.rna.num_rows(),
                        [&] { return TransformColumn(data.rna, "drug_id", StripSymbols{}); });
  rna = stage.Run("rna_unique", rna.num_rows(), [&] { return DistUnique(ctx, rna); });
  result.rna_unique = rna;
  rna = stage.Run("rna_scale", rna.num_rows(),
                  [&] { return DistStandardScale(ctx, rna, Names("rna", cfg.rna_dim)); });

  // Assembly: keep responses whose drug has both feature sets.
  Table drugs = stage.Run("response_drugs", response.num_rows(), [&] {
    return DistUnique(ctx, Project(response, {"drug_id"}));
  });
  Table with_rna = stage.Run("isin_rna", drugs.num_rows(),
                             [&] { return DistIsIn(ctx, drugs, "drug_id", rna, "drug_id"); });
  Table with_feat = stage.Run("isin_drug_features", drugs.num_rows(),
                              [&] { return DistIsIn(ctx, drugs, "drug_id", drug, "drug_id"); });
  Table common = stage.Run("common_drugs", with_rna.num_rows() + with_feat.num_rows(), [&] {
    return DistSetOp(ctx, with_rna, with_feat, SetOpKind::kIntersect);
  });
  response = stage.Run("response_filter", response.num_rows(),
                       [&] { return DistIsIn(ctx, response, "drug_id", common, "drug_id"); });

  Table assembled = stage.Run("join_drug_features", response.num_rows(), [&] {
    // Each join repeats the key as r_drug_id; keep only the left copy.
    auto drop_right_key = [](const Table& t) {
      std::vector<std::string> keep;
      for (const auto& f : t.schema().fields()) {
        if (f.name != "r_drug_id") keep.push_back(f.name);
      }
      return Project(t, keep);
    };
    Table t = drop_right_key(
        DistJoin(ctx, response, drug, {"drug_id"}, {"drug_id"}, JoinKind::kInner));
    return drop_right_key(DistJoin(ctx, t, rna, {"drug_id"}, {"drug_id"}, JoinKind::kInner));
  });
  assembled = stage.Run("sort_rows", assembled.num_rows(),
                        [&] { return DistSort(ctx, assembled, {"row_id"}); });

  result.feature_columns = {"concentration"};
  for (const auto& n : Names("fa", cfg.drug_a_dim)) result.feature_columns.push_back(n);
  for (const auto& n : Names("fb", cfg.drug_b_dim)) result.feature_columns.push_back(n);
  for (const auto& n : Names("rna", cfg.rna_dim)) result.feature_columns.push_back(n);
  std::vector<std::string> final_cols{"row_id", "drug_id"};
  final_cols.insert(final_cols.end(), result.feature_columns.begin(),
                    result.feature_columns.end());
  final_cols.push_back("growth");
  result.final_table = Project(assembled, final_cols);

  // Stage 3: table to matrix with a global prefix split in row_id order.
  TrainTestSplit split;
  size_t n_train_local = 0;
  stage.Time("to_matrix", result.final_table.num_rows(), [&] {
    Matrix x = TableToMatrix(result.final_table, result.feature_columns);
    Matrix y = TableToMatrix(result.final_table, {"growth"});
    ByteWriter w;
    w.PutU64(x.rows());
    std::vector<Bytes> counts = comm.AllGather(w.Finish());
    size_t offset = 0;
    size_t total = 0;
    for (int r = 0; r < comm.world_size(); ++r) {
      auto n = static_cast<size_t>(ByteReader(counts[static_cast<size_t>(r)]).GetU64());
      if (r < comm.rank()) offset += n;
      total += n;
    }
    const auto n_train = static_cast<size_t>(cfg.train_fraction * static_cast<double>(total));
    n_train_local = std::min(x.rows(), n_train > offset ? n_train - offset : 0);
    split = SplitPrefix(x, y, n_train_local);
  }, &n_train_local);

  // Stage 4: training.
  NetConfig net_cfg = cfg.net;
  net_cfg.in_dim = cfg.feature_dim();
  net_cfg.seed = MixSeed(cfg.seed, static_cast<uint64_t>(ctx.rank()));
  ResponseNet net(net_cfg);
  stage.Time("broadcast_params", 0, [&] { DdpBroadcastParams(comm, net); }, nullptr);
  stage.Time("train", n_train_local, [&] {
    TrainConfig tc = cfg.train;
    tc.base_seed = MixSeed(cfg.seed, 0x7A11);
    result.loss_history = Train(comm, net, split.x_train, split.y_train, tc);
  }, nullptr);
  size_t n_test = split.x_test.rows();
  stage.Time("evaluate", n_test, [&] {
    double sq = 0;
    if (n_test > 0) {
      Matrix yhat = Forward(net, split.x_test, Mode::kEval);
      sq = MseLoss(yhat, split.y_test) * static_cast<double>(n_test);
    }
    const double local[] = {sq, static_cast<double>(n_test)};
    auto total = comm.AllReduce(local, ReduceOp::kSum);
    result.test_mse = total[1] > 0 ? total[0] / total[1] : 0.0;
  }, nullptr);
  result.param_digest = ParamDigest(net.params());
  return result;
}

}  // namespace hptmt
