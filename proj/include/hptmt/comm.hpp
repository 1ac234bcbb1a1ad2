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

// Loosely synchronous communication between p symmetric workers.
//
// A Communicator owns one endpoint of a full mesh. Point-to-point sends are
// buffered and never wait for the receiver. Collectives are built from
// point-to-point messages as gather-to-rank-0 followed by broadcast, so every
// result is reduced in rank order and is bitwise reproducible. There is no
// coordinator process: each collective is entered by all workers in the same
// order with compatible arguments.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hptmt/bytes.hpp"
#include "hptmt/columnar.hpp"

namespace hptmt {

using Millis = std::chrono::milliseconds;

enum class ReduceOp { kSum, kMin, kMax };

enum class TransportKind { kInProcess, kTcp };

struct PeerAddress {
  int rank = 0;
  std::string host;
  uint16_t port = 0;

  bool operator==(const PeerAddress&) const = default;
};

/// Hostfile: one `<rank> <host>:<port>` per line, '#' starts a comment.
/// Ranks must be dense from 0. Throws kRankCollision on a repeated rank and
/// kInvalidArgument on malformed lines or gaps.
std::vector<PeerAddress> ParseHostfile(std::string_view text);
std::vector<PeerAddress> ReadHostfile(const std::string& path);
std::string FormatHostfile(std::span<const PeerAddress> peers);

/// `n` loopback addresses on currently free ports.
std::vector<PeerAddress> LoopbackPeers(int n);

/// Raw message transport; matching is by (source, tag).
class Transport {
 public:
  virtual ~Transport() = default;
  virtual int rank() const = 0;
  virtual int world_size() const = 0;
  /// Buffered: returns once the payload is queued.
  virtual void Send(int dst, uint32_t tag, Bytes payload) = 0;
  /// Blocks until a message from `src` with `tag` arrives.
  virtual Bytes Recv(int src, uint32_t tag, std::optional<Millis> timeout) = 0;
};

class InProcessFabric;

struct WorkerSpec {
  int rank = 0;
  int world_size = 1;
  TransportKind transport = TransportKind::kInProcess;
  /// tcp only: every rank exactly once.
  std::vector<PeerAddress> peers;
  /// in-process only: the shared message queues of the world.
  std::shared_ptr<InProcessFabric> fabric;
  Millis rendezvous_timeout{30000};
};

/// Shared queues for a world of in-process workers (threads).
class InProcessFabric : public std::enable_shared_from_this<InProcessFabric> {
 public:
  static std::shared_ptr<InProcessFabric> Create(int world_size);
  ~InProcessFabric();

  int world_size() const;
  /// Each rank may be claimed once; a second claim is kRankCollision.
  std::unique_ptr<Transport> Endpoint(int rank);
  /// Wakes every blocked receive with kPeerClosed.
  void Abort(const std::string& reason);

  struct State;

 private:
  explicit InProcessFabric(int world_size);
  std::unique_ptr<State> state_;
};

/// Establishes the full TCP mesh: rank i accepts from every j < i and dials
/// every j > i, then exchanges ("TMTC", version, rank) handshakes.
/// Errors: kRendezvousTimeout, kRankCollision, kVersionMismatch.
std::unique_ptr<Transport> ConnectTcp(const WorkerSpec& spec);

inline constexpr uint32_t kTcpProtocolVersion = 1;
inline constexpr uint32_t kFirstCollectiveTag = 1u << 16;

class Communicator {
 public:
  explicit Communicator(std::unique_ptr<Transport> transport);
  ~Communicator();
  Communicator(Communicator&&) noexcept;
  Communicator& operator=(Communicator&&) noexcept;

  int rank() const { return rank_; }
  int world_size() const { return world_size_; }

  /// Applies to every receive, including those inside collectives.
  void set_recv_timeout(std::optional<Millis> timeout) { recv_timeout_ = timeout; }

  // Point-to-point; user tags must be below kFirstCollectiveTag.
  void Send(int dst, uint32_t tag, Bytes payload);
  Bytes Recv(int src, uint32_t tag);

  void Barrier();
  Bytes Broadcast(int root, Bytes payload);
  /// At root: one payload per rank, in rank order. Elsewhere: empty.
  std::vector<Bytes> Gather(int root, Bytes payload);
  /// Gather to rank 0, then broadcast of the packed list.
  std::vector<Bytes> AllGather(Bytes payload);

  /// Element-wise reduction applied in rank order 0..p-1 at rank 0, then
  /// broadcast. Errors: kLengthMismatch, kOverflow (int64 sum).
  std::vector<double> AllReduce(std::span<const double> values, ReduceOp op);
  std::vector<int64_t> AllReduce(std::span<const int64_t> values, ReduceOp op);

  /// Routes row r to rank dest[r]. Each rank receives rows ordered by source
  /// rank, then source row order. Schemas are compared across ranks first.
  Table ShuffleTable(const Table& t, std::span<const int> dest);
  Table BroadcastTable(int root, const Table& t);
  /// Rows of every rank concatenated in rank order at root; empty elsewhere.
  Table GatherTable(int root, const Table& t);

  /// Records the name of every public operation while enabled; nested calls
  /// made by composite collectives are not recorded.
  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<std::string>& trace() const { return trace_; }
  void clear_trace() { trace_.clear(); }

 private:
  class OpScope;

  uint32_t NextTag() { return next_tag_++; }
  Bytes RecvRaw(int src, uint32_t tag);
  Bytes BroadcastImpl(int root, Bytes payload);
  std::vector<Bytes> GatherImpl(int root, Bytes payload);
  std::vector<Bytes> AllGatherImpl(Bytes payload);
  template <typename T>
  std::vector<T> AllReduceImpl(std::span<const T> values, ReduceOp op);

  std::unique_ptr<Transport> transport_;
  int rank_ = 0;
  int world_size_ = 1;
  uint32_t next_tag_ = kFirstCollectiveTag;
  std::optional<Millis> recv_timeout_;
  bool tracing_ = false;
  int depth_ = 0;
  std::vector<std::string> trace_;
};

/// Creates a communicator for either transport.
Communicator InitCommunicator(const WorkerSpec& spec);

/// Runs `fn` on `n` threads, each with its own in-process communicator. If a
/// worker throws, the world is aborted so peers unblock, and the first error
/// is rethrown after all threads have joined.
void RunLocalThreads(int n, const std::function<void(Communicator&)>& fn);

/// Same over TCP on loopback, one thread per rank.
void RunTcpLoopbackThreads(int n, const std::function<void(Communicator&)>& fn);

}  // namespace hptmt
