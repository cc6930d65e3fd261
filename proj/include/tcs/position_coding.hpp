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

// Block-based sparse position coding.
//
// The index range [0, d) is cut into blocks of `block_size` entries. For each
// block in order, every selected position inside it is written as a 1 bit
// followed by its w = ceil(log2 block_size) bit offset (MSB first), and the
// block is closed with a single 0 bit. Total length is K*(w+1) + num_blocks.
//
// Example (d = 12, block_size = 4, positions {0, 2, 9}):
//   1 00 1 10 0 | 0 | 1 01 0   -> 12 bits, bytes 0x98 0xA0.

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tcs/bitio.hpp"

namespace tcs {

struct PositionBitstream {
  std::vector<std::uint8_t> bytes;
  std::size_t bit_length = 0;
  std::size_t d = 0;
  std::size_t block_size = 1;

  std::size_t num_blocks() const { return (d + block_size - 1) / block_size; }
  unsigned offset_width() const { return ceil_log2(block_size); }

  bool bit(std::size_t i) const { return (bytes.at(i / 8) >> (7 - i % 8)) & 1u; }

  /// "0"/"1" rendering, for tests and debugging.
  std::string to_string() const {
    std::string s;
    s.reserve(bit_length);
    for (std::size_t i = 0; i < bit_length; ++i) s.push_back(bit(i) ? '1' : '0');
    return s;
  }
};

/// Block size for ratio phi: ceil(1/phi), guarded against 1/phi landing one
/// ulp above an integer.
inline std::size_t block_size_for_ratio(double phi) {
  require(phi > 0.0 && phi <= 1.0, "block_size_for_ratio: phi must be in (0, 1]");
  return static_cast<std::size_t>(std::ceil(1.0 / phi - 1e-9));
}

inline std::size_t position_bits(std::size_t K, std::size_t d, std::size_t block_size) {
  return K * (ceil_log2(block_size) + 1) + (d + block_size - 1) / block_size;
}

inline void write_positions(BitWriter& out, std::span<const std::uint32_t> positions,
                            std::size_t d, std::size_t block_size) {
  require(block_size >= 1, "encode_positions: block_size must be >= 1");
  for (std::size_t k = 0; k < positions.size(); ++k) {
    require(positions[k] < d, "encode_positions: position >= d");
    require(k == 0 || positions[k - 1] < positions[k],
            "encode_positions: positions not strictly increasing");
  }
  const unsigned w = ceil_log2(block_size);
  const std::size_t num_blocks = (d + block_size - 1) / block_size;
  std::size_t k = 0;
  for (std::size_t b = 0; b < num_blocks; ++b) {
    const std::size_t end = (b + 1) * block_size;
    for (; k < positions.size() && positions[k] < end; ++k) {
      out.put(true);
      out.put_bits(positions[k] - b * block_size, w);
    }
    out.put(false);
  }
}

/// Reads one position section. Rejects truncation, offsets past the block's
/// extent and non-increasing offsets within a block.
inline std::vector<std::uint32_t> read_positions(BitReader& in, std::size_t d,
                                                 std::size_t block_size) {
  require(block_size >= 1, "decode_positions: block_size must be >= 1");
  const unsigned w = ceil_log2(block_size);
  const std::size_t num_blocks = (d + block_size - 1) / block_size;
  std::vector<std::uint32_t> out;
  std::size_t block = 0;
  std::size_t next_min = 0;  // smallest admissible offset in the current block
  while (block < num_blocks) {
    const std::size_t at = in.position();
    if (!in.get()) {
      ++block;
      next_min = 0;
      continue;
    }
    const std::size_t offset = in.get_bits(w);
    const std::size_t extent = std::min(block_size, d - block * block_size);
    if (offset >= extent) throw MalformedPayload(at, "intra-block offset out of range");
    if (offset < next_min) throw MalformedPayload(at, "positions not increasing within block");
    out.push_back(static_cast<std::uint32_t>(block * block_size + offset));
    next_min = offset + 1;
  }
  return out;
}

inline PositionBitstream encode_positions(std::span<const std::uint32_t> positions,
                                          std::size_t d, std::size_t block_size) {
  BitWriter w;
  write_positions(w, positions, d, block_size);
  PositionBitstream ps;
  ps.bit_length = w.bit_length();
  ps.bytes = std::move(w).take();
  ps.d = d;
  ps.block_size = block_size;
  return ps;
}

/// Exact inverse of encode_positions. Every bit must be consumed.
inline std::vector<std::uint32_t> decode_positions(const PositionBitstream& bits) {
  require(bits.bit_length <= bits.bytes.size() * 8, "decode_positions: bit_length exceeds bytes");
  BitReader in(bits.bytes, bits.bit_length);
  auto out = read_positions(in, bits.d, bits.block_size);
  if (in.remaining() != 0)
    throw MalformedPayload(in.position(), "trailing bits after final block terminator");
  return out;
}

}  // namespace tcs
