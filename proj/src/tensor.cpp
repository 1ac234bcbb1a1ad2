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

#include "hptmt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

namespace hptmt {

namespace {

std::string Shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void ReluInPlace(Matrix& m) {
  for (double& v : m.data()) v = v > 0 ? v : 0.0;
}

// x·W + b for one layer of the flat parameter vector.
Matrix Dense(const Matrix& x, std::span<const double> params, const DenseLayout& layer) {
  const size_t n = x.rows();
  Matrix out(n, layer.out);
  const double* w = params.data() + layer.w();
  const double* b = params.data() + layer.b();
  for (size_t i = 0; i < n; ++i) {
    double* o = out.row(i).data();
    std::copy(b, b + layer.out, o);
    const double* xi = x.row(i).data();
    for (size_t k = 0; k < layer.in; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      const double* wk = w + k * layer.out;
      for (size_t j = 0; j < layer.out; ++j) o[j] += xv * wk[j];
    }
  }
  return out;
}

// Accumulates dW = xᵀ·g and db = colsum(g) into grads; returns g·Wᵀ when
// `want_input_grad`.
Matrix DenseBackward(const Matrix& x, const Matrix& g, std::span<const double> params,
                     const DenseLayout& layer, std::vector<double>& grads, bool want_input_grad) {
  const size_t n = x.rows();
  double* dw = grads.data() + layer.w();
  double* db = grads.data() + layer.b();
  for (size_t i = 0; i < n; ++i) {
    const double* xi = x.row(i).data();
    const double* gi = g.row(i).data();
    for (size_t k = 0; k < layer.in; ++k) {
      const double xv = xi[k];
      if (xv == 0.0) continue;
      double* dwk = dw + k * layer.out;
      for (size_t j = 0; j < layer.out; ++j) dwk[j] += xv * gi[j];
    }
    for (size_t j = 0; j < layer.out; ++j) db[j] += gi[j];
  }
  if (!want_input_grad) return {};
  Matrix gin(n, layer.in);
  const double* w = params.data() + layer.w();
  for (size_t i = 0; i < n; ++i) {
    const double* gi = g.row(i).data();
    double* o = gin.row(i).data();
    for (size_t k = 0; k < layer.in; ++k) {
      const double* wk = w + k * layer.out;
      double acc = 0;
      for (size_t j = 0; j < layer.out; ++j) acc += gi[j] * wk[j];
      o[k] = acc;
    }
  }
  return gin;
}

// g ⊙ [activation > 0]; ReLU'(0) is taken as 0.
void MaskByActivation(Matrix& g, const Matrix& activation) {
  for (size_t i = 0; i < g.data().size(); ++i) {
    if (!(activation.data()[i] > 0)) g.data()[i] = 0.0;
  }
}

}  // namespace

Matrix::Matrix(size_t rows, size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    Raise(ErrorCode::kShapeMismatch, "buffer of " + std::to_string(data_.size()) +
                                         " values for a " + std::to_string(rows) + "x" +
                                         std::to_string(cols) + " matrix");
  }
}

Matrix Matrix::RowRange(size_t begin, size_t end) const {
  if (begin > end || end > rows_) Raise(ErrorCode::kIndexOutOfBounds, "row range out of bounds");
  return Matrix(end - begin, cols_,
                std::vector<double>(data_.begin() + static_cast<long>(begin * cols_),
                                    data_.begin() + static_cast<long>(end * cols_)));
}

Matrix Matrix::TakeRows(std::span<const size_t> rows) const {
  Matrix out(rows.size(), cols_);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= rows_) Raise(ErrorCode::kIndexOutOfBounds, "row index out of bounds");
    std::copy_n(data_.data() + rows[i] * cols_, cols_, out.row(i).data());
  }
  return out;
}

Matrix MatMul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    Raise(ErrorCode::kShapeMismatch, "matmul of " + Shape(a) + " and " + Shape(b));
  }
  Matrix out(a.rows(), b.cols());
  for (size_t i = 0; i < a.rows(); ++i) {
    for (size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      for (size_t j = 0; j < b.cols(); ++j) out(i, j) += av * b(k, j);
    }
  }
  return out;
}

Matrix TableToMatrix(const Table& t, const std::vector<std::string>& cols) {
  Matrix m(t.num_rows(), cols.size());
  for (size_t c = 0; c < cols.size(); ++c) {
    const Column& col = t.column(cols[c]);
    if (!IsNumeric(col.type())) {
      Raise(ErrorCode::kWrongType, "column '" + cols[c] + "' is " +
                                       std::string(DataTypeName(col.type())) + ", not numeric");
    }
    if (col.null_count() > 0) {
      Raise(ErrorCode::kNullInNumericBridge, "column '" + cols[c] + "' has " +
                                                 std::to_string(col.null_count()) + " nulls");
    }
    for (size_t r = 0; r < t.num_rows(); ++r) {
      m(r, c) = col.type() == DataType::kInt64 ? static_cast<double>(col.GetInt64(r))
                                               : col.GetFloat64(r);
    }
  }
  return m;
}

Table MatrixToTable(const Matrix& m, const std::vector<std::string>& names) {
  if (names.size() != m.cols()) {
    Raise(ErrorCode::kShapeMismatch, std::to_string(names.size()) + " names for " +
                                         std::to_string(m.cols()) + " columns");
  }
  std::vector<Field> fields;
  std::vector<ColumnPtr> cols;
  for (size_t c = 0; c < m.cols(); ++c) {
    ColumnBuilder b(DataType::kFloat64);
    b.Reserve(m.rows());
    for (size_t r = 0; r < m.rows(); ++r) b.AppendFloat64(m(r, c));
    fields.push_back({names[c], DataType::kFloat64});
    cols.push_back(b.Finish());
  }
  return Table(Schema(std::move(fields)), std::move(cols), m.rows());
}

TrainTestSplit SplitPrefix(const Matrix& x, const Matrix& y, size_t n_train) {
  if (x.rows() != y.rows()) {
    Raise(ErrorCode::kShapeMismatch, "features " + Shape(x) + " vs labels " + Shape(y));
  }
  if (n_train > x.rows()) {
    Raise(ErrorCode::kInvalidArgument, "n_train " + std::to_string(n_train) + " exceeds " +
                                           std::to_string(x.rows()) + " rows");
  }
  return {x.RowRange(0, n_train), y.RowRange(0, n_train), x.RowRange(n_train, x.rows()),
          y.RowRange(n_train, y.rows())};
}

void NetConfig::Validate() const {
  if (in_dim < 1 || hidden_dim < 1) {
    Raise(ErrorCode::kInvalidArgument, "in_dim and hidden_dim must be at least 1");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    Raise(ErrorCode::kInvalidArgument, "dropout_p must be in [0, 1)");
  }
}

ResponseNet::ResponseNet(const NetConfig& config) : config_(config) {
  config_.Validate();
  size_t offset = 0;
  auto add = [&](size_t in, size_t out) {
    layers_.push_back({in, out, offset});
    offset += layers_.back().size();
  };
  add(config_.in_dim, config_.hidden_dim);
  for (size_t i = 0; i < 2 * config_.n_blocks + config_.n_tail; ++i) {
    add(config_.hidden_dim, config_.hidden_dim);
  }
  add(config_.hidden_dim, 1);

  params_.assign(offset, 0.0);
  Rng rng(config_.seed);
  // The second dense layer of each residual branch starts small so the
  // identity path dominates early on; at full scale two blocks already
  // blow up the first SGD steps.
  const double branch_scale = 1.0 / (2.0 * static_cast<double>(std::max<size_t>(1, config_.n_blocks)));
  for (size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const bool branch_out = l >= 1 && l <= 2 * config_.n_blocks && l % 2 == 0;
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in)) * (branch_out ? branch_scale : 1.0);
    for (size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.w() + i] = rng.Uniform(-bound, bound);
    }
  }
}

Matrix Forward(const ResponseNet& net, const Matrix& x, Mode mode, Rng* rng, ForwardCache* cache) {
  const NetConfig& cfg = net.config();
  if (x.cols() != cfg.in_dim) {
    Raise(ErrorCode::kShapeMismatch,
          "input " + Shape(x) + " for in_dim " + std::to_string(cfg.in_dim));
  }
  const bool dropout = mode == Mode::kTrain && cfg.dropout_p > 0;
  if (dropout && rng == nullptr) Raise(ErrorCode::kInvalidArgument, "dropout needs an rng");
  auto params = net.params();

  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c = ForwardCache{};
  c.x = x;
  c.h0 = Dense(x, params, net.input_layer());
  ReluInPlace(c.h0);

  const Matrix* h = &c.h0;
  const double keep_scale = 1.0 / (1.0 - cfg.dropout_p);
  for (size_t b = 0; b < cfg.n_blocks; ++b) {
    c.block_mid.push_back(Dense(*h, params, net.block_layer(b, 0)));
    Matrix v = Dense(c.block_mid.back(), params, net.block_layer(b, 1));
    Matrix scale;
    if (dropout) {
      scale = Matrix(v.rows(), v.cols());
      for (size_t i = 0; i < v.data().size(); ++i) {
        scale.data()[i] = rng->Bernoulli(cfg.dropout_p) ? 0.0 : keep_scale;
        v.data()[i] *= scale.data()[i];
      }
    }
    c.block_scale.push_back(std::move(scale));
    for (size_t i = 0; i < v.data().size(); ++i) v.data()[i] += h->data()[i];
    ReluInPlace(v);
    c.block_out.push_back(std::move(v));
    h = &c.block_out.back();
  }
  for (size_t t = 0; t < cfg.n_tail; ++t) {
    Matrix a = Dense(*h, params, net.tail_layer(t));
    ReluInPlace(a);
    c.tail_out.push_back(std::move(a));
    h = &c.tail_out.back();
  }
  c.yhat = Dense(*h, params, net.head_layer());
  return c.yhat;
}

double MseLoss(const Matrix& yhat, const Matrix& y) {
  if (yhat.cols() != 1 || y.cols() != 1 || yhat.rows() != y.rows() || y.rows() == 0) {
    Raise(ErrorCode::kShapeMismatch, "mse of " + Shape(yhat) + " and " + Shape(y));
  }
  double acc = 0;
  for (size_t i = 0; i < y.rows(); ++i) {
    const double d = yhat(i, 0) - y(i, 0);
    acc += d * d;
  }
  return acc / static_cast<double>(y.rows());
}

std::vector<double> Backward(const ResponseNet& net, const ForwardCache& cache, const Matrix& y) {
  const NetConfig& cfg = net.config();
  const Matrix& yhat = cache.yhat;
  if (yhat.cols() != 1 || y.cols() != 1 || yhat.rows() != y.rows() || y.rows() == 0) {
    Raise(ErrorCode::kShapeMismatch, "backward of " + Shape(yhat) + " against " + Shape(y));
  }
  auto params = net.params();
  std::vector<double> grads(net.num_params(), 0.0);

  const double n = static_cast<double>(y.rows());
  Matrix g(y.rows(), 1);
  for (size_t i = 0; i < y.rows(); ++i) g(i, 0) = 2.0 * (yhat(i, 0) - y(i, 0)) / n;

  // Walk the activations backwards: each layer's input is the previous output.
  auto output_before_tail = [&](size_t t) -> const Matrix& {
    if (t > 0) return cache.tail_out[t - 1];
    return cfg.n_blocks > 0 ? cache.block_out.back() : cache.h0;
  };
  const Matrix& head_in = cfg.n_tail > 0 ? cache.tail_out.back() : output_before_tail(0);
  g = DenseBackward(head_in, g, params, net.head_layer(), grads, true);

  for (size_t t = cfg.n_tail; t-- > 0;) {
    MaskByActivation(g, cache.tail_out[t]);
    g = DenseBackward(output_before_tail(t), g, params, net.tail_layer(t), grads, true);
  }
  for (size_t b = cfg.n_blocks; b-- > 0;) {
    const Matrix& h_in = b > 0 ? cache.block_out[b - 1] : cache.h0;
    MaskByActivation(g, cache.block_out[b]);
    Matrix gv = g;
    const Matrix& scale = cache.block_scale[b];
    if (scale.rows() > 0) {
      for (size_t i = 0; i < gv.data().size(); ++i) gv.data()[i] *= scale.data()[i];
    }
    Matrix gu = DenseBackward(cache.block_mid[b], gv, params, net.block_layer(b, 1), grads, true);
    Matrix gh = DenseBackward(h_in, gu, params, net.block_layer(b, 0), grads, true);
    for (size_t i = 0; i < g.data().size(); ++i) g.data()[i] += gh.data()[i];
  }
  MaskByActivation(g, cache.h0);
  DenseBackward(cache.x, g, params, net.input_layer(), grads, false);
  return grads;
}

void DdpBroadcastParams(Communicator& comm, ResponseNet& net) {
  if (comm.world_size() == 1) return;
  Bytes payload = comm.Broadcast(0, comm.rank() == 0 ? EncodeParams(net.params()) : Bytes{});
  std::vector<double> params = DecodeParams(payload);
  if (params.size() != net.num_params()) {
    Raise(ErrorCode::kLengthMismatch, "rank 0 has " + std::to_string(params.size()) +
                                          " parameters, this rank " +
                                          std::to_string(net.num_params()));
  }
  net.mutable_params() = std::move(params);
}

std::vector<double> DdpAllreduceGrads(Communicator& comm, std::span<const double> grads,
                                      size_t local_n) {
  std::vector<double> weighted(grads.begin(), grads.end());
  const double w = static_cast<double>(local_n);
  for (double& g : weighted) g *= w;
  std::vector<double> sum = comm.AllReduce(weighted, ReduceOp::kSum);
  const int64_t counts[] = {static_cast<int64_t>(local_n)};
  const int64_t total = comm.AllReduce(std::span<const int64_t>(counts), ReduceOp::kSum)[0];
  if (total == 0) Raise(ErrorCode::kInvalidArgument, "no rank holds any samples");
  for (double& g : sum) g /= static_cast<double>(total);
  return sum;
}

std::vector<double> Train(Communicator& comm, ResponseNet& net, const Matrix& x, const Matrix& y,
                          const TrainConfig& cfg) {
  if (!(cfg.lr >= 0)) Raise(ErrorCode::kInvalidArgument, "learning rate must be non-negative");
  if (x.rows() != y.rows() || y.cols() != 1) {
    Raise(ErrorCode::kShapeMismatch, "features " + Shape(x) + " vs labels " + Shape(y));
  }
  const size_t n = x.rows();
  Rng dropout_rng(cfg.base_seed + static_cast<uint64_t>(comm.rank()));

  size_t batch = cfg.batch_size == 0 ? std::max<size_t>(n, 1) : cfg.batch_size;
  size_t steps = 1;
  if (cfg.batch_size > 0) {
    const int64_t local[] = {static_cast<int64_t>(n)};
    const auto largest = static_cast<size_t>(
        comm.AllReduce(std::span<const int64_t>(local), ReduceOp::kMax)[0]);
    steps = std::max<size_t>(1, (largest + batch - 1) / batch);
  }

  std::vector<double> history;
  std::vector<size_t> order(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (cfg.batch_size > 0) {
      Rng shuffle_rng(cfg.base_seed + static_cast<uint64_t>(epoch));
      shuffle_rng.Shuffle(order);
    }
    double weighted_loss = 0;
    for (size_t s = 0; s < steps; ++s) {
      const size_t begin = std::min(n, s * batch);
      const size_t end = std::min(n, begin + batch);
      std::vector<double> grads(net.num_params(), 0.0);
      if (end > begin) {
        std::span<const size_t> idx(order.data() + begin, end - begin);
        Matrix xb = cfg.batch_size > 0 ? x.TakeRows(idx) : x;
        Matrix yb = cfg.batch_size > 0 ? y.TakeRows(idx) : y;
        ForwardCache cache;
        Forward(net, xb, Mode::kTrain, &dropout_rng, &cache);
        weighted_loss += MseLoss(cache.yhat, yb) * static_cast<double>(end - begin);
        grads = Backward(net, cache, yb);
      }
      std::vector<double> avg = DdpAllreduceGrads(comm, grads, end - begin);
      for (double g : avg) {
        if (!std::isfinite(g)) {
          Raise(ErrorCode::kNonFiniteLoss, "non-finite gradient in epoch " + std::to_string(epoch));
        }
      }
      auto& p = net.mutable_params();
      for (size_t i = 0; i < p.size(); ++i) p[i] -= cfg.lr * avg[i];
    }
    const double local[] = {weighted_loss, static_cast<double>(n)};
    std::vector<double> total = comm.AllReduce(local, ReduceOp::kSum);
    const double loss = total[0] / total[1];
    if (!std::isfinite(loss)) {
      Raise(ErrorCode::kNonFiniteLoss, "loss diverged in epoch " + std::to_string(epoch));
    }
    history.push_back(loss);
  }
  return history;
}

Bytes EncodeParams(std::span<const double> params) {
  ByteWriter w;
  w.PutU64(params.size());
  for (double v : params) w.PutF64(v);
  return w.Finish();
}

std::vector<double> DecodeParams(std::span<const uint8_t> data) {
  ByteReader r(data);
  const uint64_t n = r.GetU64();
  if (n > r.remaining() / 8) Raise(ErrorCode::kCorruptData, "parameter count exceeds payload");
  std::vector<double> out(n);
  for (auto& v : out) v = r.GetF64();
  if (!r.done()) Raise(ErrorCode::kCorruptData, "trailing bytes after parameters");
  return out;
}

void WriteCheckpoint(const std::string& path, std::span<const double> params) {
  Bytes b = EncodeParams(params);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) Raise(ErrorCode::kSinkFailure, "cannot write checkpoint " + path);
}

std::vector<double> ReadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Raise(ErrorCode::kInvalidArgument, "cannot open checkpoint " + path);
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeParams(b);
}

uint64_t ParamDigest(std::span<const double> params) {
  Bytes b = EncodeParams(params);
  return Fnv1a64(b);
}

}  // namespace hptmt
