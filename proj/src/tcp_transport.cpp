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

// Full-mesh TCP transport. Frames are [tag u32][src u32][len u64][payload],
// all little-endian. Each peer connection has a reader thread that drains
// frames into the local mailbox and a writer thread fed by an unbounded
// queue, so Send never waits for the remote side to receive.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>

#include "hptmt/comm.hpp"
#include "mailbox.hpp"

namespace hptmt {

namespace {

using Clock = std::chrono::steady_clock;

constexpr char kHandshakeMagic[4] = {'T', 'M', 'T', 'C'};
constexpr size_t kHandshakeSize = 12;
constexpr size_t kFrameHeaderSize = 16;

class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  ~Fd() { Reset(); }
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      Reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  int get() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void Reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::string Errno(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

// Returns false on EOF or error.
bool WriteAll(int fd, const uint8_t* data, size_t n) {
  while (n > 0) {
    ssize_t k = ::send(fd, data, n, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += k;
    n -= static_cast<size_t>(k);
  }
  return true;
}

bool ReadAll(int fd, uint8_t* data, size_t n) {
  while (n > 0) {
    ssize_t k = ::recv(fd, data, n, 0);
    if (k == 0) return false;
    if (k < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data += k;
    n -= static_cast<size_t>(k);
  }
  return true;
}

// Reads exactly n bytes or fails once the deadline passes.
void ReadWithDeadline(int fd, uint8_t* data, size_t n, Clock::time_point deadline) {
  while (n > 0) {
    auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
    if (left <= 0) Raise(ErrorCode::kRendezvousTimeout, "handshake timed out");
    pollfd p{fd, POLLIN, 0};
    int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc < 0 && errno != EINTR) Raise(ErrorCode::kRendezvousTimeout, Errno("poll"));
    if (rc <= 0) continue;
    ssize_t k = ::recv(fd, data, n, 0);
    if (k == 0) Raise(ErrorCode::kPeerClosed, "peer closed during handshake");
    if (k < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      Raise(ErrorCode::kPeerClosed, Errno("recv"));
    }
    data += k;
    n -= static_cast<size_t>(k);
  }
}

Bytes EncodeHandshake(int rank) {
  ByteWriter w;
  w.PutBytes(std::string_view(kHandshakeMagic, 4));
  w.PutU32(kTcpProtocolVersion);
  w.PutU32(static_cast<uint32_t>(rank));
  return w.Finish();
}

// Validates magic and version, returns the peer's claimed rank.
int DecodeHandshake(const uint8_t* buf) {
  ByteReader r(std::span<const uint8_t>(buf, kHandshakeSize));
  if (r.GetString(4) != std::string_view(kHandshakeMagic, 4)) {
    Raise(ErrorCode::kProtocolFault, "bad handshake magic");
  }
  uint32_t version = r.GetU32();
  if (version != kTcpProtocolVersion) {
    Raise(ErrorCode::kVersionMismatch, "peer speaks protocol version " +
                                           std::to_string(version) + ", expected " +
                                           std::to_string(kTcpProtocolVersion));
  }
  return static_cast<int>(r.GetU32());
}

sockaddr_in Resolve(const PeerAddress& p) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  int rc = ::getaddrinfo(p.host.c_str(), nullptr, &hints, &res);
  if (rc != 0 || res == nullptr) {
    Raise(ErrorCode::kInvalidArgument, "cannot resolve " + p.host + ": " + gai_strerror(rc));
  }
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(p.port);
  return addr;
}

Fd Listen(const PeerAddress& self) {
  Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd.valid()) Raise(ErrorCode::kInvalidArgument, Errno("socket"));
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = Resolve(self);
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    Raise(ErrorCode::kInvalidArgument,
          Errno(("bind " + self.host + ":" + std::to_string(self.port)).c_str()));
  }
  if (::listen(fd.get(), 128) != 0) Raise(ErrorCode::kInvalidArgument, Errno("listen"));
  return fd;
}

Fd Dial(const PeerAddress& peer, Clock::time_point deadline) {
  sockaddr_in addr = Resolve(peer);
  for (;;) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd.valid()) Raise(ErrorCode::kInvalidArgument, Errno("socket"));
    if (::connect(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0) return fd;
    if (Clock::now() >= deadline) {
      Raise(ErrorCode::kRendezvousTimeout, "could not reach rank " + std::to_string(peer.rank) +
                                               " at " + peer.host + ":" +
                                               std::to_string(peer.port));
    }
    std::this_thread::sleep_for(Millis(20));
  }
}

void SetNoDelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

class TcpTransport final : public Transport {
 public:
  explicit TcpTransport(const WorkerSpec& spec)
      : rank_(spec.rank),
        world_size_(spec.world_size),
        mailbox_(spec.world_size),
        peers_(static_cast<size_t>(spec.world_size)) {
    if (spec.peers.size() != static_cast<size_t>(world_size_)) {
      Raise(ErrorCode::kInvalidArgument, "tcp peer list must cover every rank");
    }
    std::vector<const PeerAddress*> by_rank(static_cast<size_t>(world_size_), nullptr);
    for (const auto& p : spec.peers) {
      if (p.rank < 0 || p.rank >= world_size_) {
        Raise(ErrorCode::kInvalidArgument, "peer rank outside world");
      }
      if (by_rank[static_cast<size_t>(p.rank)] != nullptr) {
        Raise(ErrorCode::kRankCollision, "rank " + std::to_string(p.rank) + " listed twice");
      }
      by_rank[static_cast<size_t>(p.rank)] = &p;
    }
    Rendezvous(by_rank, Clock::now() + spec.rendezvous_timeout);
    for (int r = 0; r < world_size_; ++r) {
      if (r == rank_) continue;
      Peer& p = peers_[static_cast<size_t>(r)];
      p.reader = std::thread([this, r] { ReaderLoop(r); });
      p.writer = std::thread([this, r] { WriterLoop(r); });
    }
  }

  ~TcpTransport() override {
    for (int r = 0; r < world_size_; ++r) {
      if (r == rank_) continue;
      Peer& p = peers_[static_cast<size_t>(r)];
      {
        std::lock_guard<std::mutex> lock(p.mu);
        p.stopping = true;
      }
      p.cv.notify_all();
    }
    for (int r = 0; r < world_size_; ++r) {
      if (r == rank_) continue;
      Peer& p = peers_[static_cast<size_t>(r)];
      if (p.writer.joinable()) p.writer.join();
      ::shutdown(p.fd.get(), SHUT_WR);
    }
    // Readers exit once each peer has shut down its side too.
    for (int r = 0; r < world_size_; ++r) {
      if (r == rank_) continue;
      Peer& p = peers_[static_cast<size_t>(r)];
      if (p.reader.joinable()) p.reader.join();
    }
  }

  int rank() const override { return rank_; }
  int world_size() const override { return world_size_; }

  void Send(int dst, uint32_t tag, Bytes payload) override {
    if (dst == rank_) {
      mailbox_.Deliver(rank_, tag, std::move(payload));
      return;
    }
    ByteWriter w;
    w.PutU32(tag);
    w.PutU32(static_cast<uint32_t>(rank_));
    w.PutU64(payload.size());
    Bytes frame = w.Finish();
    frame.insert(frame.end(), payload.begin(), payload.end());
    Peer& p = peers_[static_cast<size_t>(dst)];
    {
      std::lock_guard<std::mutex> lock(p.mu);
      if (p.write_failed) {
        Raise(ErrorCode::kPeerClosed, "connection to rank " + std::to_string(dst) + " is closed");
      }
      p.queue.push_back(std::move(frame));
    }
    p.cv.notify_one();
  }

  Bytes Recv(int src, uint32_t tag, std::optional<Millis> timeout) override {
    return mailbox_.Take(src, tag, timeout);
  }

 private:
  struct Peer {
    Fd fd;
    std::thread reader;
    std::thread writer;
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Bytes> queue;
    bool stopping = false;
    bool write_failed = false;
  };

  void Rendezvous(const std::vector<const PeerAddress*>& by_rank, Clock::time_point deadline) {
    Fd listener;
    if (rank_ > 0) listener = Listen(*by_rank[static_cast<size_t>(rank_)]);
    const Bytes hello = EncodeHandshake(rank_);

    // Accept every lower rank.
    int pending = rank_;
    while (pending > 0) {
      auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now()).count();
      if (left <= 0) {
        Raise(ErrorCode::kRendezvousTimeout,
              "rank " + std::to_string(rank_) + " still waiting for " + std::to_string(pending) +
                  " lower-ranked peers");
      }
      pollfd pfd{listener.get(), POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left));
      if (rc <= 0) continue;
      Fd conn(::accept(listener.get(), nullptr, nullptr));
      if (!conn.valid()) continue;
      uint8_t buf[kHandshakeSize];
      ReadWithDeadline(conn.get(), buf, kHandshakeSize, deadline);
      int peer = DecodeHandshake(buf);
      if (peer < 0 || peer >= rank_) {
        Raise(ErrorCode::kProtocolFault,
              "rank " + std::to_string(peer) + " dialed rank " + std::to_string(rank_));
      }
      Peer& slot = peers_[static_cast<size_t>(peer)];
      if (slot.fd.valid()) {
        Raise(ErrorCode::kRankCollision,
              "two peers claim rank " + std::to_string(peer) + " at rank " + std::to_string(rank_));
      }
      if (!WriteAll(conn.get(), hello.data(), hello.size())) {
        Raise(ErrorCode::kPeerClosed, "peer " + std::to_string(peer) + " closed during handshake");
      }
      SetNoDelay(conn.get());
      slot.fd = std::move(conn);
      --pending;
    }

    // Dial every higher rank.
    for (int r = rank_ + 1; r < world_size_; ++r) {
      Fd conn = Dial(*by_rank[static_cast<size_t>(r)], deadline);
      if (!WriteAll(conn.get(), hello.data(), hello.size())) {
        Raise(ErrorCode::kPeerClosed, "rank " + std::to_string(r) + " closed during handshake");
      }
      uint8_t buf[kHandshakeSize];
      ReadWithDeadline(conn.get(), buf, kHandshakeSize, deadline);
      int peer = DecodeHandshake(buf);
      if (peer != r) {
        Raise(ErrorCode::kRankCollision, "address of rank " + std::to_string(r) +
                                             " answered as rank " + std::to_string(peer));
      }
      SetNoDelay(conn.get());
      peers_[static_cast<size_t>(r)].fd = std::move(conn);
    }
  }

  void ReaderLoop(int peer) {
    int fd = peers_[static_cast<size_t>(peer)].fd.get();
    uint8_t header[kFrameHeaderSize];
    while (ReadAll(fd, header, kFrameHeaderSize)) {
      ByteReader r(header);
      uint32_t tag = r.GetU32();
      uint32_t src = r.GetU32();
      uint64_t len = r.GetU64();
      if (src != static_cast<uint32_t>(peer)) break;
      Bytes payload(len);
      if (len > 0 && !ReadAll(fd, payload.data(), len)) break;
      mailbox_.Deliver(peer, tag, std::move(payload));
    }
    mailbox_.CloseSource(peer);
  }

  void WriterLoop(int peer) {
    Peer& p = peers_[static_cast<size_t>(peer)];
    for (;;) {
      Bytes frame;
      {
        std::unique_lock<std::mutex> lock(p.mu);
        p.cv.wait(lock, [&] { return !p.queue.empty() || p.stopping; });
        if (p.queue.empty()) return;
        frame = std::move(p.queue.front());
        p.queue.pop_front();
      }
      if (!WriteAll(p.fd.get(), frame.data(), frame.size())) {
        std::lock_guard<std::mutex> lock(p.mu);
        p.write_failed = true;
        p.queue.clear();
        return;
      }
    }
  }

  int rank_;
  int world_size_;
  internal::Mailbox mailbox_;
  std::vector<Peer> peers_;
};

}  // namespace

std::unique_ptr<Transport> ConnectTcp(const WorkerSpec& spec) {
  return std::make_unique<TcpTransport>(spec);
}

std::vector<PeerAddress> LoopbackPeers(int n) {
  std::vector<PeerAddress> peers;
  std::vector<Fd> held;
  for (int r = 0; r < n; ++r) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    int one = 1;
    ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      Raise(ErrorCode::kInvalidArgument, Errno("bind"));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len);
    peers.push_back({r, "127.0.0.1", ntohs(addr.sin_port)});
    held.push_back(std::move(fd));
  }
  return peers;
}

}  // namespace hptmt
