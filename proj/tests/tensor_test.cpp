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

#include <cstdio>
#include <filesystem>

#include "hptmt/tensor.hpp"
#include "suites.hpp"

namespace hptmt {
namespace {

ErrorCode CodeOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kInvalidArgument;
}

TEST(Bridge, TableToMatrix) {
  Table t = MakeTable({{"a", MakeInt64Column({1, 2})}, {"b", MakeFloat64Column({3.5, 4.5})}});
  EXPECT_EQ(TableToMatrix(t, {"a", "b"}), Matrix(2, 2, {1, 3.5, 2, 4.5}));
  Table n = MakeTable({{"a", MakeInt64Column({1, std::nullopt})}});
  EXPECT_EQ(CodeOf([&] { TableToMatrix(n, {"a"}); }), ErrorCode::kNullInNumericBridge);
  Table s = MakeTable({{"s", MakeUtf8Column({"x"})}});
  EXPECT_EQ(CodeOf([&] { TableToMatrix(s, {"s"}); }), ErrorCode::kWrongType);
  Table back = MatrixToTable(Matrix(2, 1, {1, 2}), {"m"});
  EXPECT_TRUE(CanonicalEqual(back, MakeTable({{"m", MakeFloat64Column({1.0, 2.0})}})));
}

TEST(Bridge, PrefixSplit) {
  Matrix x(150, 3), y(150, 1);
  auto s = SplitPrefix(x, y, 100);
  EXPECT_EQ(s.x_train.rows(), 100u);
  EXPECT_EQ(s.x_test.rows(), 50u);
  EXPECT_EQ(s.y_test.rows(), 50u);
  EXPECT_THROW(SplitPrefix(x, y, 151), Error);
}

TEST(MatMul, SmallProduct) {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 1, {1, 0, -1});
  EXPECT_EQ(MatMul(a, b), Matrix(2, 1, {-2, -2}));
  EXPECT_EQ(CodeOf([&] { MatMul(a, a); }), ErrorCode::kShapeMismatch);
}

TEST(ResponseNet, LayoutCoversFlatVector) {
  NetConfig cfg{.in_dim = 5, .hidden_dim = 7, .n_blocks = 2, .n_tail = 1};
  ResponseNet net(cfg);
  size_t expect = (5 * 7 + 7) + 5 * (7 * 7 + 7) + (7 + 1);
  EXPECT_EQ(net.num_params(), expect);
  EXPECT_EQ(net.input_layer().offset, 0u);
  EXPECT_EQ(net.block_layer(0, 0).offset, net.input_layer().size());
  EXPECT_EQ(net.head_layer().offset + net.head_layer().size(), expect);
  for (size_t i = 0; i < 7; ++i) EXPECT_EQ(net.params()[net.input_layer().b() + i], 0.0);
}

TEST(ResponseNet, SameSeedSameParams) {
  NetConfig cfg{.in_dim = 3, .hidden_dim = 8, .seed = 9};
  EXPECT_EQ(ParamDigest(ResponseNet(cfg).params()), ParamDigest(ResponseNet(cfg).params()));
  cfg.seed = 10;
  EXPECT_NE(ParamDigest(ResponseNet(cfg).params()), ParamDigest(ResponseNet(NetConfig{.in_dim = 3, .hidden_dim = 8, .seed = 9}).params()));
}

TEST(Forward, ZeroNetworkOutputsHeadBias) {
  ResponseNet net(NetConfig{.in_dim = 2, .hidden_dim = 4, .n_blocks = 0, .n_tail = 0});
  std::fill(net.mutable_params().begin(), net.mutable_params().end(), 0.0);
  net.mutable_params()[net.head_layer().b()] = 0.25;
  Matrix out = Forward(net, Matrix(3, 2, 1.0), Mode::kEval);
  EXPECT_EQ(out, Matrix(3, 1, 0.25));
  EXPECT_EQ(CodeOf([&] { Forward(net, Matrix(3, 4), Mode::kEval); }), ErrorCode::kShapeMismatch);
}

TEST(Backward, PerfectFitHasZeroLossAndGradient) {
  ResponseNet net(NetConfig{.in_dim = 2, .hidden_dim = 4, .n_blocks = 1});
  Matrix x(5, 2, 0.3);
  ForwardCache cache;
  Matrix yhat = Forward(net, x, Mode::kEval, nullptr, &cache);
  EXPECT_EQ(MseLoss(yhat, yhat), 0.0);
  for (double g : Backward(net, cache, yhat)) EXPECT_EQ(g, 0.0);
}

TEST(Backward, FiniteDifferences) {
  auto rep = testing::GradientCheck(NetConfig{.in_dim = 4, .hidden_dim = 16, .n_blocks = 2, .n_tail = 1, .seed = 3},
                                    12, 1e-6, 1e-5, 1e-8, 21);
  EXPECT_EQ(rep.violations, 0u) << rep.first;
}

TEST(Dropout, TrainModeNeedsRngAndEvalIsDeterministic) {
  ResponseNet net(NetConfig{.in_dim = 2, .hidden_dim = 8, .n_blocks = 1, .dropout_p = 0.5});
  Matrix x(4, 2, 1.0);
  EXPECT_EQ(CodeOf([&] { Forward(net, x, Mode::kTrain); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(Forward(net, x, Mode::kEval), Forward(net, x, Mode::kEval));
  Rng a(1), b(1);
  EXPECT_EQ(Forward(net, x, Mode::kTrain, &a), Forward(net, x, Mode::kTrain, &b));
}

TEST(Ddp, BroadcastMakesReplicasEqual) {
  std::vector<uint64_t> digests(3);
  RunLocalThreads(3, [&](Communicator& comm) {
    ResponseNet net(NetConfig{.in_dim = 3, .hidden_dim = 8, .seed = static_cast<uint64_t>(comm.rank())});
    DdpBroadcastParams(comm, net);
    digests[static_cast<size_t>(comm.rank())] = ParamDigest(net.params());
  });
  EXPECT_EQ(digests[0], digests[1]);
  EXPECT_EQ(digests[0], digests[2]);
  EXPECT_EQ(digests[0], ParamDigest(ResponseNet(NetConfig{.in_dim = 3, .hidden_dim = 8, .seed = 0}).params()));
}

TEST(Ddp, WeightedGradientMean) {
  RunLocalThreads(2, [&](Communicator& comm) {
    std::vector<double> g = {comm.rank() == 0 ? 1.0 : 3.0};
    EXPECT_EQ(DdpAllreduceGrads(comm, g, 1), std::vector<double>{2.0});
    std::vector<double> h = {comm.rank() == 0 ? 0.0 : 4.0};
    EXPECT_EQ(DdpAllreduceGrads(comm, h, comm.rank() == 0 ? 1 : 3), std::vector<double>{3.0});
  });
}

TEST(Ddp, MatchesSingleProcess) {
  auto rep = testing::DdpEquivalence(4, NetConfig{.in_dim = 3, .hidden_dim = 16, .n_blocks = 2, .seed = 4},
                                     16, 5, 0.01, 77);
  EXPECT_LE(rep.max_grad_diff, 1e-9);
  EXPECT_LE(rep.max_traj_diff, 1e-8);
  EXPECT_TRUE(rep.ranks_bitwise_equal);
}

TEST(Train, ZeroLearningRateKeepsParams) {
  RunLocalThreads(2, [&](Communicator& comm) {
    ResponseNet net(NetConfig{.in_dim = 1, .hidden_dim = 4, .n_blocks = 1});
    auto before = std::vector<double>(net.params().begin(), net.params().end());
    Matrix x(6, 1, 0.5), y(6, 1, 1.0);
    auto hist = Train(comm, net, x, y, {.lr = 0.0, .epochs = 3});
    EXPECT_EQ(std::vector<double>(net.params().begin(), net.params().end()), before);
    EXPECT_EQ(hist[0], hist[2]);
  });
}

// y = 2x on [-1, 1]. The least squares slope of the data is exactly 2; the
// learned slope is the least squares slope of the fitted values.
TEST(Train, LearnsLinearSlope) {
  RunLocalThreads(1, [&](Communicator& comm) {
    ResponseNet net(NetConfig{.in_dim = 1, .hidden_dim = 64, .n_blocks = 0, .n_tail = 0, .seed = 1});
    const size_t n = 41;
    Matrix x(n, 1), y(n, 1);
    for (size_t i = 0; i < n; ++i) {
      x(i, 0) = -1.0 + 0.05 * static_cast<double>(i);
      y(i, 0) = 2.0 * x(i, 0);
    }
    Train(comm, net, x, y, {.lr = 0.01, .epochs = 200});
    Matrix yhat = Forward(net, x, Mode::kEval);
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
      mx += x(i, 0) / n;
      my += yhat(i, 0) / n;
    }
    double sxy = 0, sxx = 0;
    for (size_t i = 0; i < n; ++i) {
      sxy += (x(i, 0) - mx) * (yhat(i, 0) - my);
      sxx += (x(i, 0) - mx) * (x(i, 0) - mx);
    }
    EXPECT_NEAR(sxy / sxx, 2.0, 1e-3);
  });
}

TEST(Train, NonFiniteLossIsRaised) {
  RunLocalThreads(1, [&](Communicator& comm) {
    ResponseNet net(NetConfig{.in_dim = 1, .hidden_dim = 4, .n_blocks = 0});
    Matrix x(3, 1, 1.0), y(3, 1, std::nan(""));
    EXPECT_EQ(CodeOf([&] { Train(comm, net, x, y, {.epochs = 1}); }), ErrorCode::kNonFiniteLoss);
  });
}

TEST(Train, MiniBatchKeepsRanksInLockstep) {
  std::vector<uint64_t> digests(3);
  RunLocalThreads(3, [&](Communicator& comm) {
    ResponseNet net(NetConfig{.in_dim = 2, .hidden_dim = 8, .n_blocks = 1, .dropout_p = 0.2});
    DdpBroadcastParams(comm, net);
    size_t rows = 5 + 7 * static_cast<size_t>(comm.rank());  // uneven shards
    Rng rng(static_cast<uint64_t>(comm.rank()));
    Matrix x(rows, 2), y(rows, 1);
    for (auto& v : x.data()) v = rng.Normal();
    for (auto& v : y.data()) v = rng.Normal();
    auto hist = Train(comm, net, x, y, {.lr = 0.01, .epochs = 4, .batch_size = 4, .base_seed = 8});
    EXPECT_EQ(hist.size(), 4u);
    digests[static_cast<size_t>(comm.rank())] = ParamDigest(net.params());
  });
  EXPECT_EQ(digests[0], digests[1]);
  EXPECT_EQ(digests[0], digests[2]);
}

TEST(Checkpoint, RoundTrip) {
  ResponseNet net(NetConfig{.in_dim = 3, .hidden_dim = 5});
  auto path = (std::filesystem::temp_directory_path() / "hptmt_ckpt.bin").string();
  WriteCheckpoint(path, net.params());
  auto back = ReadCheckpoint(path);
  std::remove(path.c_str());
  EXPECT_EQ(back, std::vector<double>(net.params().begin(), net.params().end()));
  Bytes enc = EncodeParams(back);
  enc.pop_back();
  EXPECT_EQ(CodeOf([&] { DecodeParams(enc); }), ErrorCode::kCorruptData);
}

}  // namespace
}  // namespace hptmt
