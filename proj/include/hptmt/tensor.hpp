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

// Dense matrices, the residual response network with hand-derived gradients,
// and data-parallel training over a Communicator.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hptmt/bytes.hpp"
#include "hptmt/columnar.hpp"
#include "hptmt/comm.hpp"
#include "hptmt/rng.hpp"

namespace hptmt {

class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(size_t rows, size_t cols, std::vector<double> data);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  double& operator()(size_t r, size_t c) { return data_[r * cols_ + c]; }
  double operator()(size_t r, size_t c) const { return data_[r * cols_ + c]; }
  std::span<double> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  /// Rows [begin, end).
  Matrix RowRange(size_t begin, size_t end) const;
  Matrix TakeRows(std::span<const size_t> rows) const;

  bool operator==(const Matrix&) const = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<double> data_;
};

/// a·b. Errors: kShapeMismatch.
Matrix MatMul(const Matrix& a, const Matrix& b);

/// Numeric, null-free columns in order; int64 values are widened.
/// Errors: kWrongType, kNullInNumericBridge, kUnknownColumn.
Matrix TableToMatrix(const Table& t, const std::vector<std::string>& cols);
/// Float64 columns named `names`.
Table MatrixToTable(const Matrix& m, const std::vector<std::string>& names);

struct TrainTestSplit {
  Matrix x_train, y_train, x_test, y_test;
};

/// First n_train rows train, the rest test.
TrainTestSplit SplitPrefix(const Matrix& x, const Matrix& y, size_t n_train);

struct NetConfig {
  size_t in_dim = 1;
  size_t hidden_dim = 64;
  size_t n_blocks = 2;
  size_t n_tail = 1;
  double dropout_p = 0.0;
  uint64_t seed = 0;

  void Validate() const;
};

/// Location of one dense layer inside the flat parameter vector. W is
/// in x out, row-major, immediately followed by b.
struct DenseLayout {
  size_t in = 0;
  size_t out = 0;
  size_t offset = 0;

  size_t w() const { return offset; }
  size_t b() const { return offset + in * out; }
  size_t size() const { return in * out + out; }
};

/// Input dense layer, residual blocks of two dense layers, dense tail layers,
/// and a single-output linear head. Parameters live in one flat vector in
/// layer order (W then b per layer).
class ResponseNet {
 public:
  /// Weights uniform in +-sqrt(6 / fan_in) from the seed, biases zero.
  explicit ResponseNet(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  std::span<const double> params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }
  size_t num_params() const { return params_.size(); }

  const DenseLayout& input_layer() const { return layers_.front(); }
  /// which = 0 for D1, 1 for D2.
  const DenseLayout& block_layer(size_t block, int which) const {
    return layers_[1 + 2 * block + static_cast<size_t>(which)];
  }
  const DenseLayout& tail_layer(size_t i) const { return layers_[1 + 2 * config_.n_blocks + i]; }
  const DenseLayout& head_layer() const { return layers_.back(); }

 private:
  NetConfig config_;
  std::vector<DenseLayout> layers_;
  std::vector<double> params_;
};

enum class Mode { kTrain, kEval };

/// Activations kept by Forward for Backward.
struct ForwardCache {
  Matrix x;
  Matrix h0;
  std::vector<Matrix> block_mid;    // D1 output per block
  std::vector<Matrix> block_scale;  // dropout multipliers; empty when identity
  std::vector<Matrix> block_out;
  std::vector<Matrix> tail_out;
  Matrix yhat;
};

/// `rng` drives the dropout masks and is only used in train mode with
/// dropout_p > 0. Errors: kShapeMismatch.
Matrix Forward(const ResponseNet& net, const Matrix& x, Mode mode, Rng* rng = nullptr,
               ForwardCache* cache = nullptr);

/// Mean squared error over n x 1 matrices. Errors: kShapeMismatch.
double MseLoss(const Matrix& yhat, const Matrix& y);

/// Gradient of MseLoss(Forward(x), y) with respect to every parameter, in
/// parameter order. Errors: kShapeMismatch.
std::vector<double> Backward(const ResponseNet& net, const ForwardCache& cache, const Matrix& y);

/// Copies rank 0's parameters to every rank.
void DdpBroadcastParams(Communicator& comm, ResponseNet& net);

/// (sum_r n_r * g_r) / (sum_r n_r) via two sum-allreduces.
/// Errors: kLengthMismatch, kInvalidArgument when no rank has samples.
std::vector<double> DdpAllreduceGrads(Communicator& comm, std::span<const double> grads,
                                      size_t local_n);

struct TrainConfig {
  double lr = 0.01;
  int epochs = 1;
  /// 0 selects full-batch training.
  size_t batch_size = 0;
  uint64_t base_seed = 0;
};

/// Collective SGD over the rank-local shard (x, y). Returns the global
/// sample-weighted mean loss of every epoch, measured before each step.
/// Mini-batch mode shuffles the shard with Rng(base_seed + epoch); every rank
/// runs the same number of steps, possibly with empty batches.
/// Errors: kNonFiniteLoss, kInvalidArgument.
std::vector<double> Train(Communicator& comm, ResponseNet& net, const Matrix& x, const Matrix& y,
                          const TrainConfig& cfg);

/// u64 LE count followed by the values as LE doubles.
Bytes EncodeParams(std::span<const double> params);
std::vector<double> DecodeParams(std::span<const uint8_t> data);
void WriteCheckpoint(const std::string& path, std::span<const double> params);
std::vector<double> ReadCheckpoint(const std::string& path);

/// FNV-1a over the encoded parameter bytes.
uint64_t ParamDigest(std::span<const double> params);

}  // namespace hptmt
