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

// Uplink payload framing.
//
//   offset  size  field (little-endian)
//   0       4     d
//   4       4     round
//   8       4     K_global   (values whose positions the receiver knows)
//   12      4     K_local    (values whose positions are encoded)
//   16      1     quantizer kind (0 none, 1 scaled sign, 2 fractional)
//   17      2     P (0 for none, 1 for scaled sign)
//   19      4     block_size of the position section (0 when K_local = 0)
//   23      4*T   level table, T float32 magnitudes (T = 0, 1 or P)
//   ...           MSB-first bitstream:
//                   K_global value codes, in ascending global-mask order
//                   position section (omitted when K_local = 0)
//                   K_local value codes, in ascending index order
//                   zero padding to the next byte
//
// A value code is 32 raw float32 bits (none), one sign bit (scaled sign), or
// one sign bit followed by ceil(log2 P) interval-index bits (fractional).

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tcs/bitio.hpp"
#include "tcs/compressors.hpp"
#include "tcs/position_coding.hpp"
#include "tcs/quantization.hpp"

namespace tcs {

inline constexpr std::size_t kPayloadHeaderBytes = 23;

struct PayloadHeader {
  std::uint32_t d = 0;
  std::uint32_t round = 0;
  std::uint32_t k_global = 0;
  std::uint32_t k_local = 0;
  QuantizerKind kind = QuantizerKind::none;
  std::uint16_t P = 0;
  std::uint32_t block_size = 0;

  QuantizerSpec quantizer() const {
    return {kind, kind == QuantizerKind::fractional ? std::uint32_t{P}
                                                    : QuantizerSpec{kind, 0}.table_size()};
  }
};

struct EncodedPayload {
  PayloadHeader header;
  std::vector<std::uint8_t> bytes;

  std::size_t size_bits() const { return bytes.size() * 8; }
};

/// Encoded payload plus the values the receiver will reconstruct from it.
struct EncodeResult {
  EncodedPayload payload;
  SparseUpdate dequantized;
};

inline EncodeResult encode_payload_with_values(const SparseUpdate& su, const QuantizerSpec& spec,
                                               double phi_local, std::uint32_t round = 0) {
  const std::size_t d = su.global.dim();
  require(su.global_values.size() == su.global.popcount(), "encode_payload: global values/mask size");
  require(su.local_values.size() == su.local.popcount(), "encode_payload: local values/mask size");
  require_same_layout(su.global.layout(), su.local.layout(), "encode_payload");
  require(masks_disjoint(su.global, su.local), "encode_payload: global and local overlap");

  PayloadHeader h;
  h.d = static_cast<std::uint32_t>(d);
  h.round = round;
  h.k_global = static_cast<std::uint32_t>(su.global.popcount());
  h.k_local = static_cast<std::uint32_t>(su.local.popcount());
  h.kind = spec.kind;
  h.P = static_cast<std::uint16_t>(spec.table_size());
  h.block_size = h.k_local > 0 ? static_cast<std::uint32_t>(block_size_for_ratio(phi_local)) : 0;

  std::vector<double> all(su.global_values);
  all.insert(all.end(), su.local_values.begin(), su.local_values.end());
  WireQuantized wq = wire_quantize(all, spec);
  const unsigned q = spec.bits_per_value();

  BitWriter w;
  w.put_le(h.d, 4);
  w.put_le(h.round, 4);
  w.put_le(h.k_global, 4);
  w.put_le(h.k_local, 4);
  w.put_le(static_cast<std::uint8_t>(h.kind), 1);
  w.put_le(h.P, 2);
  w.put_le(h.block_size, 4);
  for (float level : wq.table) {
    std::uint32_t bits;
    std::memcpy(&bits, &level, sizeof bits);
    w.put_le(bits, 4);
  }
  for (std::size_t k = 0; k < h.k_global; ++k) w.put_bits(wq.codes[k], q);
  if (h.k_local > 0) {
    write_positions(w, su.local.indices(), d, h.block_size);
    for (std::size_t k = 0; k < h.k_local; ++k) w.put_bits(wq.codes[h.k_global + k], q);
  }

  SparseUpdate deq{su.global,
                   std::vector<double>(wq.dequantized.begin(), wq.dequantized.begin() + h.k_global),
                   su.local,
                   std::vector<double>(wq.dequantized.begin() + h.k_global, wq.dequantized.end())};
  return {EncodedPayload{h, std::move(w).take()}, std::move(deq)};
}

inline EncodedPayload encode_payload(const SparseUpdate& su, const QuantizerSpec& spec,
                                     double phi_local, std::uint32_t round = 0) {
  return encode_payload_with_values(su, spec, phi_local, round).payload;
}

/// Parses the fixed header only.
inline PayloadHeader read_payload_header(std::span<const std::uint8_t> bytes) {
  BitReader in(bytes);
  PayloadHeader h;
  h.d = static_cast<std::uint32_t>(in.get_le(4));
  h.round = static_cast<std::uint32_t>(in.get_le(4));
  h.k_global = static_cast<std::uint32_t>(in.get_le(4));
  h.k_local = static_cast<std::uint32_t>(in.get_le(4));
  const auto kind = static_cast<std::uint8_t>(in.get_le(1));
  if (kind > 2) throw MalformedPayload(128, "unknown quantizer kind");
  h.kind = static_cast<QuantizerKind>(kind);
  h.P = static_cast<std::uint16_t>(in.get_le(2));
  h.block_size = static_cast<std::uint32_t>(in.get_le(4));
  switch (h.kind) {
    case QuantizerKind::none:
      if (h.P != 0) throw MalformedPayload(136, "P must be 0 for unquantized payloads");
      break;
    case QuantizerKind::scaled_sign:
      if (h.P != 1) throw MalformedPayload(136, "P must be 1 for scaled-sign payloads");
      break;
    case QuantizerKind::fractional:
      if (h.P == 0) throw MalformedPayload(136, "P must be >= 1");
      break;
  }
  if (h.k_global > h.d || h.k_local > h.d - h.k_global)
    throw MalformedPayload(64, "K_global + K_local exceeds d");
  if ((h.k_local == 0) != (h.block_size == 0))
    throw MalformedPayload(152, "block_size inconsistent with K_local");
  return h;
}

/// Rebuilds the sparse update. `m_global` is the receiver's own copy of the
/// global mask; its positions are never on the wire.
inline SparseUpdate decode_payload(std::span<const std::uint8_t> bytes, const Mask& m_global) {
  const PayloadHeader h = read_payload_header(bytes);
  if (h.d != m_global.dim()) throw MalformedPayload(0, "d does not match the receiver's mask");
  if (h.k_global != m_global.popcount())
    throw MalformedPayload(64, "K_global does not match the receiver's global mask");

  const QuantizerSpec spec = h.quantizer();
  BitReader in(bytes);
  in.get_le(static_cast<unsigned>(kPayloadHeaderBytes));  // skip header, already validated
  std::vector<float> table(spec.table_size());
  for (auto& level : table) {
    const std::size_t at = in.position();
    auto bits = static_cast<std::uint32_t>(in.get_le(4));
    std::memcpy(&level, &bits, sizeof level);
    if (!std::isfinite(level) || level < 0.0f) throw MalformedPayload(at, "invalid level value");
  }

  const unsigned q = spec.bits_per_value();
  auto read_value = [&]() {
    const std::size_t at = in.position();
    const auto code = static_cast<std::uint32_t>(in.get_bits(q));
    if (spec.kind == QuantizerKind::fractional) {
      const std::uint32_t idx = code & ((std::uint32_t{1} << spec.index_bits()) - 1);
      if (idx >= spec.P) throw MalformedPayload(at, "interval index out of range");
    }
    const double v = dequantize_code(spec, table, code);
    if (!std::isfinite(v)) throw MalformedPayload(at, "non-finite value");
    return v;
  };

  std::vector<double> global_values(h.k_global);
  for (auto& v : global_values) v = read_value();

  std::vector<std::uint32_t> local_pos;
  std::vector<double> local_values;
  if (h.k_local > 0) {
    const std::size_t at = in.position();
    local_pos = read_positions(in, h.d, h.block_size);
    if (local_pos.size() != h.k_local)
      throw MalformedPayload(at, "position count does not match K_local");
    for (auto p : local_pos)
      if (m_global.contains(p)) throw MalformedPayload(at, "local position overlaps global mask");
    local_values.resize(h.k_local);
    for (auto& v : local_values) v = read_value();
  }

  const std::size_t end = in.position();
  if (bytes.size() != (end + 7) / 8) throw MalformedPayload(end, "trailing bytes after payload");
  while (in.remaining() > 0)
    if (in.get()) throw MalformedPayload(end, "nonzero padding bits");

  return SparseUpdate{m_global, std::move(global_values), Mask(m_global.layout(), std::move(local_pos)),
                      std::move(local_values)};
}

inline SparseUpdate decode_payload(const EncodedPayload& p, const Mask& m_global) {
  return decode_payload(p.bytes, m_global);
}

}  // namespace tcs
