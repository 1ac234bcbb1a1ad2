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

#include "hptmt/comm.hpp"

#include <algorithm>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "mailbox.hpp"

namespace hptmt {

// --- hostfile ---------------------------------------------------------------

std::vector<PeerAddress> ParseHostfile(std::string_view text) {
  std::vector<PeerAddress> peers;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string rank_text;
    std::string endpoint;
    if (!(fields >> rank_text)) continue;
    std::string extra;
    if (!(fields >> endpoint) || (fields >> extra)) {
      Raise(ErrorCode::kInvalidArgument,
            "hostfile line " + std::to_string(lineno) + ": expected '<rank> <host>:<port>'");
    }
    auto colon = endpoint.rfind(':');
    if (colon == std::string::npos || colon == 0) {
      Raise(ErrorCode::kInvalidArgument,
            "hostfile line " + std::to_string(lineno) + ": missing host:port");
    }
    PeerAddress p;
    try {
      size_t used = 0;
      p.rank = std::stoi(rank_text, &used);
      if (used != rank_text.size() || p.rank < 0) throw std::invalid_argument("rank");
      int port = std::stoi(endpoint.substr(colon + 1), &used);
      if (used != endpoint.size() - colon - 1 || port < 0 || port > 65535) {
        throw std::invalid_argument("port");
      }
      p.port = static_cast<uint16_t>(port);
    } catch (const std::exception&) {
      Raise(ErrorCode::kInvalidArgument,
            "hostfile line " + std::to_string(lineno) + ": bad rank or port");
    }
    p.host = endpoint.substr(0, colon);
    peers.push_back(std::move(p));
  }
  std::sort(peers.begin(), peers.end(),
            [](const PeerAddress& a, const PeerAddress& b) { return a.rank < b.rank; });
  for (size_t i = 0; i < peers.size(); ++i) {
    if (i > 0 && peers[i].rank == peers[i - 1].rank) {
      Raise(ErrorCode::kRankCollision,
            "rank " + std::to_string(peers[i].rank) + " claimed by " + peers[i - 1].host + ":" +
                std::to_string(peers[i - 1].port) + " and " + peers[i].host + ":" +
                std::to_string(peers[i].port));
    }
  }
  for (size_t i = 0; i < peers.size(); ++i) {
    if (peers[i].rank != static_cast<int>(i)) {
      Raise(ErrorCode::kInvalidArgument, "hostfile ranks are not dense from 0");
    }
  }
  return peers;
}

std::vector<PeerAddress> ReadHostfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Raise(ErrorCode::kInvalidArgument, "cannot open hostfile " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseHostfile(ss.str());
}

std::string FormatHostfile(std::span<const PeerAddress> peers) {
  std::string out;
  for (const auto& p : peers) {
    out += std::to_string(p.rank) + " " + p.host + ":" + std::to_string(p.port) + "\n";
  }
  return out;
}

// --- in-process transport ---------------------------------------------------

struct InProcessFabric::State {
  explicit State(int n) : world_size(n), claimed(static_cast<size_t>(n), false) {
    for (int i = 0; i < n; ++i) boxes.push_back(std::make_unique<internal::Mailbox>(n));
  }
  int world_size;
  std::mutex mu;
  std::vector<bool> claimed;
  std::vector<std::unique_ptr<internal::Mailbox>> boxes;
};

namespace {

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::shared_ptr<InProcessFabric> fabric, InProcessFabric::State* state,
                     int rank)
      : fabric_(std::move(fabric)), state_(state), rank_(rank) {}

  ~InProcessTransport() override {
    for (int r = 0; r < state_->world_size; ++r) {
      if (r != rank_) state_->boxes[static_cast<size_t>(r)]->CloseSource(rank_);
    }
  }

  int rank() const override { return rank_; }
  int world_size() const override { return state_->world_size; }

  void Send(int dst, uint32_t tag, Bytes payload) override {
    state_->boxes[static_cast<size_t>(dst)]->Deliver(rank_, tag, std::move(payload));
  }

  Bytes Recv(int src, uint32_t tag, std::optional<Millis> timeout) override {
    return state_->boxes[static_cast<size_t>(rank_)]->Take(src, tag, timeout);
  }

 private:
  std::shared_ptr<InProcessFabric> fabric_;
  InProcessFabric::State* state_;
  int rank_;
};

}  // namespace

InProcessFabric::InProcessFabric(int world_size) : state_(std::make_unique<State>(world_size)) {}
InProcessFabric::~InProcessFabric() = default;

std::shared_ptr<InProcessFabric> InProcessFabric::Create(int world_size) {
  if (world_size < 1) Raise(ErrorCode::kInvalidArgument, "world_size must be positive");
  return std::shared_ptr<InProcessFabric>(new InProcessFabric(world_size));
}

int InProcessFabric::world_size() const { return state_->world_size; }

std::unique_ptr<Transport> InProcessFabric::Endpoint(int rank) {
  if (rank < 0 || rank >= state_->world_size) {
    Raise(ErrorCode::kInvalidArgument, "rank " + std::to_string(rank) + " outside world");
  }
  {
    std::lock_guard<std::mutex> lock(state_->mu);
    if (state_->claimed[static_cast<size_t>(rank)]) {
      Raise(ErrorCode::kRankCollision, "rank " + std::to_string(rank) + " already claimed");
    }
    state_->claimed[static_cast<size_t>(rank)] = true;
  }
  return std::make_unique<InProcessTransport>(shared_from_this(), state_.get(), rank);
}

void InProcessFabric::Abort(const std::string& reason) {
  for (auto& box : state_->boxes) box->Abort(reason);
}

// --- Communicator -----------------------------------------------------------

class Communicator::OpScope {
 public:
  OpScope(Communicator& c, const char* name) : c_(c) {
    if (c_.tracing_ && c_.depth_ == 0) c_.trace_.emplace_back(name);
    ++c_.depth_;
  }
  ~OpScope() { --c_.depth_; }
  OpScope(const OpScope&) = delete;
  OpScope& operator=(const OpScope&) = delete;

 private:
  Communicator& c_;
};

Communicator::Communicator(std::unique_ptr<Transport> transport)
    : transport_(std::move(transport)),
      rank_(transport_->rank()),
      world_size_(transport_->world_size()) {}

Communicator::~Communicator() = default;
Communicator::Communicator(Communicator&&) noexcept = default;
Communicator& Communicator::operator=(Communicator&&) noexcept = default;

Bytes Communicator::RecvRaw(int src, uint32_t tag) {
  return transport_->Recv(src, tag, recv_timeout_);
}

void Communicator::Send(int dst, uint32_t tag, Bytes payload) {
  OpScope scope(*this, "send");
  if (tag >= kFirstCollectiveTag) {
    Raise(ErrorCode::kInvalidArgument, "user tags must be below 65536");
  }
  if (dst < 0 || dst >= world_size_) Raise(ErrorCode::kInvalidArgument, "bad destination rank");
  transport_->Send(dst, tag, std::move(payload));
}

Bytes Communicator::Recv(int src, uint32_t tag) {
  OpScope scope(*this, "recv");
  if (tag >= kFirstCollectiveTag) {
    Raise(ErrorCode::kInvalidArgument, "user tags must be below 65536");
  }
  if (src < 0 || src >= world_size_) Raise(ErrorCode::kInvalidArgument, "bad source rank");
  return RecvRaw(src, tag);
}

Bytes Communicator::BroadcastImpl(int root, Bytes payload) {
  const uint32_t tag = NextTag();
  if (root < 0 || root >= world_size_) Raise(ErrorCode::kInvalidArgument, "bad root rank");
  if (rank_ == root) {
    for (int r = 0; r < world_size_; ++r) {
      if (r != root) transport_->Send(r, tag, payload);
    }
    return payload;
  }
  return RecvRaw(root, tag);
}

std::vector<Bytes> Communicator::GatherImpl(int root, Bytes payload) {
  const uint32_t tag = NextTag();
  if (root < 0 || root >= world_size_) Raise(ErrorCode::kInvalidArgument, "bad root rank");
  if (rank_ != root) {
    transport_->Send(root, tag, std::move(payload));
    return {};
  }
  std::vector<Bytes> out(static_cast<size_t>(world_size_));
  for (int r = 0; r < world_size_; ++r) {
    out[static_cast<size_t>(r)] = r == root ? std::move(payload) : RecvRaw(r, tag);
  }
  return out;
}

std::vector<Bytes> Communicator::AllGatherImpl(Bytes payload) {
  auto parts = GatherImpl(0, std::move(payload));
  Bytes packed;
  if (rank_ == 0) {
    ByteWriter w(&packed);
    w.PutU32(static_cast<uint32_t>(parts.size()));
    for (const auto& p : parts) w.PutBlob(p);
  }
  packed = BroadcastImpl(0, std::move(packed));
  ByteReader r(packed);
  uint32_t n = r.GetU32();
  if (n != static_cast<uint32_t>(world_size_)) {
    Raise(ErrorCode::kProtocolFault, "allgather returned wrong part count");
  }
  std::vector<Bytes> out;
  out.reserve(n);
  for (uint32_t i = 0; i < n; ++i) out.push_back(r.GetBlob());
  return out;
}

void Communicator::Barrier() {
  OpScope scope(*this, "barrier");
  GatherImpl(0, {});
  BroadcastImpl(0, {});
}

Bytes Communicator::Broadcast(int root, Bytes payload) {
  OpScope scope(*this, "broadcast");
  return BroadcastImpl(root, std::move(payload));
}

std::vector<Bytes> Communicator::Gather(int root, Bytes payload) {
  OpScope scope(*this, "gather");
  return GatherImpl(root, std::move(payload));
}

std::vector<Bytes> Communicator::AllGather(Bytes payload) {
  OpScope scope(*this, "allgather");
  return AllGatherImpl(std::move(payload));
}

namespace {

enum : uint8_t { kReduceOk = 0, kReduceLength = 1, kReduceOverflow = 2, kReduceType = 3 };

template <typename T>
constexpr uint8_t ElementCode() {
  return std::is_same_v<T, double> ? 2 : 1;
}

template <typename T>
void PutElement(ByteWriter& w, T v) {
  if constexpr (std::is_same_v<T, double>) {
    w.PutF64(v);
  } else {
    w.PutI64(v);
  }
}

template <typename T>
T GetElement(ByteReader& r) {
  if constexpr (std::is_same_v<T, double>) {
    return r.GetF64();
  } else {
    return r.GetI64();
  }
}

// Returns false on int64 overflow.
template <typename T>
bool Combine(T& acc, T v, ReduceOp op) {
  switch (op) {
    case ReduceOp::kSum:
      if constexpr (std::is_same_v<T, int64_t>) {
        return !__builtin_add_overflow(acc, v, &acc);
      } else {
        acc += v;
        return true;
      }
    case ReduceOp::kMin:
      if (v < acc) acc = v;
      return true;
    case ReduceOp::kMax:
      if (v > acc) acc = v;
      return true;
  }
  return true;
}

}  // namespace

template <typename T>
std::vector<T> Communicator::AllReduceImpl(std::span<const T> values, ReduceOp op) {
  ByteWriter w;
  w.PutU8(ElementCode<T>());
  w.PutU8(static_cast<uint8_t>(op));
  w.PutU64(values.size());
  for (T v : values) PutElement(w, v);
  auto parts = GatherImpl(0, w.Finish());

  Bytes result;
  if (rank_ == 0) {
    uint8_t status = kReduceOk;
    std::vector<T> acc;
    for (size_t r = 0; r < parts.size() && status == kReduceOk; ++r) {
      ByteReader in(parts[r]);
      uint8_t code = in.GetU8();
      uint8_t rop = in.GetU8();
      uint64_t n = in.GetU64();
      if (code != ElementCode<T>() || rop != static_cast<uint8_t>(op)) {
        status = kReduceType;
      } else if (n != values.size()) {
        status = kReduceLength;
      } else if (r == 0) {
        acc.resize(n);
        for (auto& a : acc) a = GetElement<T>(in);
      } else {
        for (auto& a : acc) {
          if (!Combine(a, GetElement<T>(in), op)) status = kReduceOverflow;
        }
      }
    }
    ByteWriter out(&result);
    out.PutU8(status);
    if (status == kReduceOk) {
      for (T v : acc) PutElement(out, v);
    }
  }
  result = BroadcastImpl(0, std::move(result));
  ByteReader in(result);
  switch (in.GetU8()) {
    case kReduceOk: break;
    case kReduceLength:
      Raise(ErrorCode::kLengthMismatch, "allreduce vectors differ in length across ranks");
    case kReduceOverflow: Raise(ErrorCode::kOverflow, "int64 allreduce sum overflowed");
    default: Raise(ErrorCode::kProtocolFault, "allreduce element type or op differs across ranks");
  }
  std::vector<T> out(values.size());
  for (auto& v : out) v = GetElement<T>(in);
  return out;
}

std::vector<double> Communicator::AllReduce(std::span<const double> values, ReduceOp op) {
  OpScope scope(*this, "allreduce");
  return AllReduceImpl(values, op);
}

std::vector<int64_t> Communicator::AllReduce(std::span<const int64_t> values, ReduceOp op) {
  OpScope scope(*this, "allreduce");
  return AllReduceImpl(values, op);
}

Table Communicator::ShuffleTable(const Table& t, std::span<const int> dest) {
  OpScope scope(*this, "shuffle_table");
  if (dest.size() != t.num_rows()) {
    Raise(ErrorCode::kInvalidArgument, "shuffle destination count differs from row count");
  }
  // Every rank checks every digest, so a mismatch fails on all ranks alike.
  ByteWriter digest;
  digest.PutU64(Fnv1a64(SerializeSchema(t.schema())));
  auto digests = AllGatherImpl(digest.Finish());
  for (const auto& d : digests) {
    if (d != digests[0]) {
      Raise(ErrorCode::kSchemaMismatch, "shuffle input schemas differ across ranks");
    }
  }
  for (int d : dest) {
    if (d < 0 || d >= world_size_) {
      Raise(ErrorCode::kInvalidArgument, "shuffle destination out of range");
    }
  }

  const uint32_t tag = NextTag();
  std::vector<std::vector<size_t>> rows(static_cast<size_t>(world_size_));
  for (size_t r = 0; r < dest.size(); ++r) rows[static_cast<size_t>(dest[r])].push_back(r);
  for (int d = 0; d < world_size_; ++d) {
    if (d == rank_) continue;
    transport_->Send(d, tag, SerializeTable(Take(t, rows[static_cast<size_t>(d)])));
  }
  std::vector<Table> parts;
  parts.reserve(static_cast<size_t>(world_size_));
  for (int s = 0; s < world_size_; ++s) {
    if (s == rank_) {
      parts.push_back(Take(t, rows[static_cast<size_t>(s)]));
    } else {
      parts.push_back(DeserializeTable(RecvRaw(s, tag)));
    }
  }
  return Concat(parts, t.schema());
}

Table Communicator::BroadcastTable(int root, const Table& t) {
  OpScope scope(*this, "broadcast_table");
  Bytes payload = rank_ == root ? SerializeTable(t) : Bytes{};
  return DeserializeTable(BroadcastImpl(root, std::move(payload)));
}

Table Communicator::GatherTable(int root, const Table& t) {
  OpScope scope(*this, "gather_table");
  auto parts = GatherImpl(root, SerializeTable(t));
  if (rank_ != root) return Table::Empty(t.schema());
  std::vector<Table> tables;
  tables.reserve(parts.size());
  for (const auto& p : parts) tables.push_back(DeserializeTable(p));
  return Concat(tables, t.schema());
}

// --- launch helpers ---------------------------------------------------------

Communicator InitCommunicator(const WorkerSpec& spec) {
  if (spec.world_size < 1 || spec.rank < 0 || spec.rank >= spec.world_size) {
    Raise(ErrorCode::kInvalidArgument, "rank must lie in [0, world_size)");
  }
  if (spec.transport == TransportKind::kInProcess) {
    if (!spec.fabric) Raise(ErrorCode::kInvalidArgument, "in-process worker needs a fabric");
    if (spec.fabric->world_size() != spec.world_size) {
      Raise(ErrorCode::kInvalidArgument, "fabric world size differs from spec");
    }
    return Communicator(spec.fabric->Endpoint(spec.rank));
  }
  return Communicator(ConnectTcp(spec));
}

namespace {

struct FirstError {
  std::mutex mu;
  std::exception_ptr error;

  // Returns true for the first caller.
  bool Record(std::exception_ptr e) {
    std::lock_guard<std::mutex> lock(mu);
    if (error) return false;
    error = std::move(e);
    return true;
  }
};

}  // namespace

void RunLocalThreads(int n, const std::function<void(Communicator&)>& fn) {
  auto fabric = InProcessFabric::Create(n);
  FirstError first;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    threads.emplace_back([&, r] {
      try {
        WorkerSpec spec;
        spec.rank = r;
        spec.world_size = n;
        spec.fabric = fabric;
        Communicator comm = InitCommunicator(spec);
        fn(comm);
      } catch (const std::exception& e) {
        if (first.Record(std::current_exception())) {
          fabric->Abort("rank " + std::to_string(r) + " failed: " + e.what());
        }
      } catch (...) {
        if (first.Record(std::current_exception())) {
          fabric->Abort("rank " + std::to_string(r) + " failed");
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first.error) std::rethrow_exception(first.error);
}

void RunTcpLoopbackThreads(int n, const std::function<void(Communicator&)>& fn) {
  auto peers = LoopbackPeers(n);
  FirstError first;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(n));
  for (int r = 0; r < n; ++r) {
    threads.emplace_back([&, r] {
      try {
        WorkerSpec spec;
        spec.rank = r;
        spec.world_size = n;
        spec.transport = TransportKind::kTcp;
        spec.peers = peers;
        Communicator comm = InitCommunicator(spec);
        fn(comm);
      } catch (...) {
        first.Record(std::current_exception());
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first.error) std::rethrow_exception(first.error);
}

}  // namespace hptmt
