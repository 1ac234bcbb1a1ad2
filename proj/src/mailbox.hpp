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

#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hptmt/comm.hpp"

namespace hptmt::internal {

// Per-worker receive queues keyed by (source, tag). FIFO within a key.
class Mailbox {
 public:
  explicit Mailbox(int world_size) : closed_(static_cast<size_t>(world_size), false) {}

  void Deliver(int src, uint32_t tag, Bytes payload) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      queues_[{src, tag}].push_back(std::move(payload));
    }
    cv_.notify_all();
  }

  /// No further messages will arrive from src.
  void CloseSource(int src) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_[static_cast<size_t>(src)] = true;
    }
    cv_.notify_all();
  }

  void Abort(const std::string& reason) {
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (!aborted_) abort_reason_ = reason;
      aborted_ = true;
    }
    cv_.notify_all();
  }

  Bytes Take(int src, uint32_t tag, std::optional<Millis> timeout) {
    std::unique_lock<std::mutex> lock(mu_);
    const auto key = std::make_pair(src, tag);
    auto ready = [&] {
      auto it = queues_.find(key);
      return (it != queues_.end() && !it->second.empty()) || aborted_ ||
             closed_[static_cast<size_t>(src)];
    };
    if (timeout) {
      if (!cv_.wait_for(lock, *timeout, ready)) {
        Raise(ErrorCode::kTimeout, "no message from rank " + std::to_string(src) + " tag " +
                                       std::to_string(tag) + " within " +
                                       std::to_string(timeout->count()) + " ms");
      }
    } else {
      cv_.wait(lock, ready);
    }
    auto it = queues_.find(key);
    if (it != queues_.end() && !it->second.empty()) {
      Bytes out = std::move(it->second.front());
      it->second.pop_front();
      if (it->second.empty()) queues_.erase(it);
      return out;
    }
    if (aborted_) Raise(ErrorCode::kPeerClosed, "world aborted: " + abort_reason_);
    Raise(ErrorCode::kPeerClosed, "rank " + std::to_string(src) + " closed");
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::pair<int, uint32_t>, std::deque<Bytes>> queues_;
  std::vector<bool> closed_;
  bool aborted_ = false;
  std::string abort_reason_;
};

}  // namespace hptmt::internal
