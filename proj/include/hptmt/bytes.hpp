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

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hptmt/error.hpp"

namespace hptmt {

using Bytes = std::vector<uint8_t>;

// Little-endian append-only encoder. All wire and file formats go through it
// so byte order never depends on the host.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes* out) : out_(out) {}

  void PutU8(uint8_t v) { buf().push_back(v); }
  void PutU32(uint32_t v) { PutLE(v, 4); }
  void PutU64(uint64_t v) { PutLE(v, 8); }
  void PutI64(int64_t v) { PutLE(static_cast<uint64_t>(v), 8); }
  void PutF64(double v) { PutLE(std::bit_cast<uint64_t>(v), 8); }
  void PutBytes(std::span<const uint8_t> data) {
    buf().insert(buf().end(), data.begin(), data.end());
  }
  void PutBytes(std::string_view data) {
    buf().insert(buf().end(), data.begin(), data.end());
  }
  void PutZeros(size_t n) { buf().resize(buf().size() + n, 0); }

  /// Writes a u64 length prefix followed by the payload.
  void PutBlob(std::span<const uint8_t> data) {
    PutU64(data.size());
    PutBytes(data);
  }

  Bytes& buf() { return out_ != nullptr ? *out_ : own_; }
  Bytes Finish() { return std::move(buf()); }

 private:
  void PutLE(uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf().push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  Bytes own_;
  Bytes* out_ = nullptr;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t GetU8() { return static_cast<uint8_t>(GetLE(1)); }
  uint32_t GetU32() { return static_cast<uint32_t>(GetLE(4)); }
  uint64_t GetU64() { return GetLE(8); }
  int64_t GetI64() { return static_cast<int64_t>(GetLE(8)); }
  double GetF64() { return std::bit_cast<double>(GetLE(8)); }

  std::span<const uint8_t> GetBytes(size_t n) {
    Need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string GetString(size_t n) {
    auto s = GetBytes(n);
    return std::string(reinterpret_cast<const char*>(s.data()), s.size());
  }
  Bytes GetBlob() {
    uint64_t n = GetU64();
    auto s = GetBytes(n);
    return Bytes(s.begin(), s.end());
  }

  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  void Need(size_t n) const {
    if (n > remaining()) {
      Raise(ErrorCode::kCorruptData, "truncated buffer: need " + std::to_string(n) +
                                         " bytes, have " + std::to_string(remaining()));
    }
  }
  uint64_t GetLE(int width) {
    Need(static_cast<size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<size_t>(width);
    return v;
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

inline constexpr uint64_t kFnvOffsetBasis = 14695981039346656037ULL;
inline constexpr uint64_t kFnvPrime = 1099511628211ULL;

/// FNV-1a, 64-bit.
inline uint64_t Fnv1a64(std::span<const uint8_t> data, uint64_t h = kFnvOffsetBasis) {
  for (uint8_t b : data) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t Fnv1a64(std::string_view data) {
  return Fnv1a64(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(data.data()),
                                          data.size()));
}

}  // namespace hptmt
