// Copyright 2026 The TCS Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcs/tensor.hpp"

namespace tcs {

/// Untrusted input failed to parse. Distinct from ContractViolation, which
/// signals a caller bug.
class MalformedPayload : public std::runtime_error {
 public:
  MalformedPayload(std::size_t bit_offset, const std::string& reason)
      : std::runtime_error("malformed payload at bit offset " + std::to_string(bit_offset) +
                           ": " + reason),
        bit_offset_(bit_offset) {}

  std::size_t bit_offset() const { return bit_offset_; }

 private:
  std::size_t bit_offset_;
};

/// Appends bits MSB-first: stream bit 0 is the high bit of byte 0.
class BitWriter {
 public:
  void put(bool bit) {
    if (nbits_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (nbits_ % 8));
    ++nbits_;
  }

  /// Low `width` bits of value, most significant first.
  void put_bits(std::uint64_t value, unsigned width) {
    for (unsigned k = width; k-- > 0;) put(((value >> k) & 1u) != 0);
  }

  /// Whole little-endian bytes; requires byte alignment.
  void put_le(std::uint64_t value, unsigned num_bytes) {
    require(nbits_ % 8 == 0, "BitWriter::put_le: stream not byte aligned");
    for (unsigned k = 0; k < num_bytes; ++k) {
      bytes_.push_back(static_cast<std::uint8_t>((value >> (8 * k)) & 0xFFu));
      nbits_ += 8;
    }
  }

  std::size_t bit_length() const { return nbits_; }
  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() && { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t nbits_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes)
      : BitReader(bytes, bytes.size() * 8) {}

  BitReader(std::span<const std::uint8_t> bytes, std::size_t bit_length)
      : bytes_(bytes), limit_(bit_length) {
    require(bit_length <= bytes.size() * 8, "BitReader: bit length exceeds buffer");
  }

  bool get() {
    if (pos_ >= limit_) throw MalformedPayload(pos_, "unexpected end of stream");
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }

  std::uint64_t get_bits(unsigned width) {
    if (limit_ - pos_ < width) throw MalformedPayload(pos_, "unexpected end of stream");
    std::uint64_t v = 0;
    for (unsigned k = 0; k < width; ++k) v = (v << 1) | (get() ? 1u : 0u);
    return v;
  }

  std::uint64_t get_le(unsigned num_bytes) {
    require(pos_ % 8 == 0, "BitReader::get_le: stream not byte aligned");
    if (limit_ - pos_ < 8u * num_bytes)
      throw MalformedPayload(pos_, "unexpected end of stream");
    std::uint64_t v = 0;
    for (unsigned k = 0; k < num_bytes; ++k)
      v |= static_cast<std::uint64_t>(bytes_[pos_ / 8 + k]) << (8 * k);
    pos_ += 8u * num_bytes;
    return v;
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return limit_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

/// ceil(log2 n) for n >= 1; 0 for n == 1.
inline unsigned ceil_log2(std::uint64_t n) {
  require(n >= 1, "ceil_log2: n must be >= 1");
  unsigned w = 0;
  while ((std::uint64_t{1} << w) < n) ++w;
  return w;
}

}  // namespace tcs
