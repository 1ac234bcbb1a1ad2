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

#include <atomic>
#include <chrono>
#include <thread>

#include "hptmt/comm.hpp"
#include "hptmt/selftest.hpp"
#include "suites.hpp"

namespace hptmt {
namespace {

using std::chrono::steady_clock;

Bytes B(std::string_view s) { return Bytes(s.begin(), s.end()); }
std::string S(const Bytes& b) { return std::string(b.begin(), b.end()); }

TEST(Hostfile, ParsesAndFormats) {
  auto peers = ParseHostfile("# world\n0 127.0.0.1:5000\n1 localhost:5001\n");
  ASSERT_EQ(peers.size(), 2u);
  EXPECT_EQ(peers[1].host, "localhost");
  EXPECT_EQ(peers[1].port, 5001);
  EXPECT_EQ(ParseHostfile(FormatHostfile(peers)), peers);
}

TEST(Hostfile, DuplicateRankCollides) {
  try {
    ParseHostfile("0 h:1\n1 h:2\n1 h:3\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankCollision);
  }
}

TEST(Hostfile, MalformedLinesAndGaps) {
  EXPECT_THROW(ParseHostfile("0 nohostport\n"), Error);
  EXPECT_THROW(ParseHostfile("0 h:1\n2 h:2\n"), Error);
  EXPECT_THROW(ParseHostfile("0 h:99999\n"), Error);
}

TEST(InProcess, SecondClaimOfRankCollides) {
  auto fabric = InProcessFabric::Create(2);
  auto a = fabric->Endpoint(0);
  try {
    fabric->Endpoint(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRankCollision);
  }
}

TEST(Communicator, SingletonWorldIsIdentity) {
  RunLocalThreads(1, [](Communicator& comm) {
    comm.Barrier();
    EXPECT_EQ(S(comm.Broadcast(0, B("p"))), "p");
    std::vector<double> v = {1.5, -2};
    EXPECT_EQ(comm.AllReduce(v, ReduceOp::kSum), v);
    auto g = comm.Gather(0, B("x"));
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(S(g[0]), "x");
  });
}

TEST(Communicator, PointToPointOrdering) {
  RunLocalThreads(2, [](Communicator& comm) {
    if (comm.rank() == 0) {
      comm.Send(1, 7, B("abc"));
      comm.Send(1, 5, B("x"));
      comm.Send(1, 5, B("y"));
    } else {
      EXPECT_EQ(S(comm.Recv(0, 5)), "x");
      EXPECT_EQ(S(comm.Recv(0, 5)), "y");
      EXPECT_EQ(S(comm.Recv(0, 7)), "abc");
    }
  });
}

TEST(Communicator, ReservedTagRejected) {
  RunLocalThreads(1, [](Communicator& comm) {
    EXPECT_THROW(comm.Send(0, kFirstCollectiveTag, B("x")), Error);
  });
}

TEST(Communicator, BarrierWaitsForSlowest) {
  std::vector<steady_clock::time_point> exit_at(4);
  steady_clock::time_point start = steady_clock::now();
  RunLocalThreads(4, [&](Communicator& comm) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10 * comm.rank()));
    comm.Barrier();
    exit_at[static_cast<size_t>(comm.rank())] = steady_clock::now();
  });
  for (auto t : exit_at) EXPECT_GE(t - start, std::chrono::milliseconds(30));
}

TEST(Communicator, BroadcastGatherAllReduce) {
  RunLocalThreads(4, [](Communicator& comm) {
    EXPECT_EQ(S(comm.Broadcast(0, comm.rank() == 0 ? B("p") : Bytes{})), "p");
    EXPECT_TRUE(comm.Broadcast(2, Bytes{}).empty());
    auto g = comm.Gather(0, B(std::to_string(comm.rank())));
    if (comm.rank() == 0) {
      ASSERT_EQ(g.size(), 4u);
      for (int r = 0; r < 4; ++r) EXPECT_EQ(S(g[static_cast<size_t>(r)]), std::to_string(r));
    } else {
      EXPECT_TRUE(g.empty());
    }
    std::vector<double> mine = {static_cast<double>(comm.rank())};
    EXPECT_EQ(comm.AllReduce(mine, ReduceOp::kMin), std::vector<double>{0});
    EXPECT_EQ(comm.AllReduce(mine, ReduceOp::kMax), std::vector<double>{3});
    EXPECT_EQ(comm.AllGather(B(std::to_string(comm.rank()))).size(), 4u);
  });
  RunLocalThreads(2, [](Communicator& comm) {
    std::vector<double> v = comm.rank() == 0 ? std::vector<double>{1, 2} : std::vector<double>{3, 4};
    EXPECT_EQ(comm.AllReduce(v, ReduceOp::kSum), (std::vector<double>{4, 6}));
  });
}

TEST(Communicator, AllReduceLengthMismatchAndOverflow) {
  std::atomic<int> mismatches = 0;
  RunLocalThreads(2, [&](Communicator& comm) {
    std::vector<double> v(static_cast<size_t>(comm.rank()) + 1, 1.0);
    try {
      comm.AllReduce(v, ReduceOp::kSum);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kLengthMismatch) ++mismatches;
    }
  });
  EXPECT_EQ(mismatches, 2);

  std::atomic<int> overflows = 0;
  RunLocalThreads(2, [&](Communicator& comm) {
    std::vector<int64_t> v = {INT64_MAX};
    try {
      comm.AllReduce(v, ReduceOp::kSum);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kOverflow) ++overflows;
    }
  });
  EXPECT_EQ(overflows, 2);
}

TEST(Communicator, ShuffleRoutesByDestination) {
  RunLocalThreads(2, [](Communicator& comm) {
    Table t = MakeTable({{"k", MakeInt64Column({0, 1})}});
    const int dest[] = {0, 1};
    Table got = comm.ShuffleTable(t, dest);
    int64_t want = comm.rank();
    EXPECT_TRUE(CanonicalEqual(got, MakeTable({{"k", MakeInt64Column({want, want})}})));
  });
}

TEST(Communicator, SelfShuffleIsIdentity) {
  RunLocalThreads(3, [](Communicator& comm) {
    Rng rng(static_cast<uint64_t>(comm.rank()));
    Table t = RandomTable(rng, {.rows = 40, .distinct = 5});
    std::vector<int> dest(t.num_rows(), comm.rank());
    EXPECT_EQ(SerializeTable(comm.ShuffleTable(t, dest)), SerializeTable(t));
  });
}

TEST(Communicator, ShuffleOrdersBySourceRank) {
  RunLocalThreads(3, [](Communicator& comm) {
    int64_t r = comm.rank();
    Table t = MakeTable({{"src", MakeInt64Column({r, r})}, {"i", MakeInt64Column({0, 1})}});
    std::vector<int> dest = {0, 0};
    Table got = comm.ShuffleTable(t, dest);
    if (comm.rank() == 0) {
      ASSERT_EQ(got.num_rows(), 6u);
      for (size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(got.column(0).GetInt64(i), static_cast<int64_t>(i / 2));
        EXPECT_EQ(got.column(1).GetInt64(i), static_cast<int64_t>(i % 2));
      }
    }
  });
}

TEST(Communicator, ShuffleSchemaMismatchRaisedEverywhere) {
  std::atomic<int> errors = 0;
  RunLocalThreads(2, [&](Communicator& comm) {
    Table t = comm.rank() == 0 ? MakeTable({{"a", MakeInt64Column({1})}})
                               : MakeTable({{"b", MakeInt64Column({1})}});
    std::vector<int> dest = {0};
    try {
      comm.ShuffleTable(t, dest);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSchemaMismatch) ++errors;
    }
  });
  EXPECT_EQ(errors, 2);
}

TEST(Communicator, BroadcastAndGatherTables) {
  RunLocalThreads(3, [](Communicator& comm) {
    Table src = MakeTable({{"a", MakeInt64Column({1, 2, 3})}});
    Table got = comm.BroadcastTable(0, comm.rank() == 0 ? src : Table::Empty(src.schema()));
    EXPECT_TRUE(CanonicalEqual(got, src));
  });
  RunLocalThreads(4, [](Communicator& comm) {
    Table one = MakeTable({{"r", MakeInt64Column({comm.rank()})}});
    Table g = comm.GatherTable(0, one);
    if (comm.rank() == 0) {
      EXPECT_EQ(SerializeTable(g), SerializeTable(MakeTable({{"r", MakeInt64Column({0, 1, 2, 3})}})));
    } else {
      EXPECT_EQ(g.num_rows(), 0u);
    }
  });
}

TEST(Communicator, TraceRecordsTopLevelOps) {
  RunLocalThreads(2, [](Communicator& comm) {
    comm.set_tracing(true);
    std::vector<double> v = {1};
    comm.AllReduce(v, ReduceOp::kSum);
    comm.Barrier();
    Table t = MakeTable({{"a", MakeInt64Column({1})}});
    std::vector<int> dest = {0};
    comm.ShuffleTable(t, dest);
    EXPECT_EQ(comm.trace(), (std::vector<std::string>{"allreduce", "barrier", "shuffle_table"}));
  });
}

TEST(Communicator, RecvTimeout) {
  RunLocalThreads(2, [](Communicator& comm) {
    if (comm.rank() == 1) {
      comm.set_recv_timeout(Millis(50));
      try {
        comm.Recv(0, 3);
        ADD_FAILURE();
      } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::kTimeout);
      }
    }
    // Keeps rank 0 alive so rank 1 sees a timeout rather than a closed peer.
    comm.Barrier();
  });
}

TEST(Communicator, WorkerFailureUnblocksPeers) {
  EXPECT_THROW(RunLocalThreads(3,
                               [](Communicator& comm) {
                                 if (comm.rank() == 1) Raise(ErrorCode::kInvalidArgument, "boom");
                                 comm.Barrier();
                               }),
               Error);
}

TEST(Tcp, LoopbackCollectives) {
  RunTcpLoopbackThreads(3, [](Communicator& comm) {
    std::vector<int64_t> v = {comm.rank() + 1};
    EXPECT_EQ(comm.AllReduce(v, ReduceOp::kSum), std::vector<int64_t>{6});
    Bytes big(1 << 20, static_cast<uint8_t>(comm.rank()));
    auto all = comm.AllGather(big);
    for (int r = 0; r < 3; ++r) EXPECT_EQ(all[static_cast<size_t>(r)][12345], r);
  });
}

TEST(Tcp, RendezvousTimeoutWhenPeerMissing) {
  auto peers = LoopbackPeers(2);
  WorkerSpec spec;
  spec.rank = 0;
  spec.world_size = 2;
  spec.transport = TransportKind::kTcp;
  spec.peers = peers;
  spec.rendezvous_timeout = Millis(300);
  try {
    ConnectTcp(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRendezvousTimeout);
  }
}

TEST(Properties, TransportEquivalence) {
  for (int p : {1, 2, 4}) {
    auto fail = testing::TransportEquivalence(p, 99 + static_cast<uint64_t>(p));
    EXPECT_FALSE(fail) << *fail;
  }
}

TEST(Properties, ShuffleConservation) {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto fail = testing::ShuffleConservation(1 + static_cast<int>(seed % 4), seed);
    EXPECT_FALSE(fail) << *fail;
  }
}

TEST(Properties, AllReduceBitwiseReproducible) {
  auto fail = testing::AllReduceReproducible(4, 5, 5);
  EXPECT_FALSE(fail) << *fail;
}

TEST(Properties, BarrierStress) {
  auto fail = testing::BarrierStress(4, 100, Millis(60000));
  EXPECT_FALSE(fail) << *fail;
}

}  // namespace
}  // namespace hptmt
