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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcs/bitio.hpp"

namespace tcs {

enum class QuantizerKind : std::uint8_t { none = 0, scaled_sign = 1, fractional = 2 };

inline const char* to_string(QuantizerKind k) {
  switch (k) {
    case QuantizerKind::none: return "none";
    case QuantizerKind::scaled_sign: return "scaled_sign";
    case QuantizerKind::fractional: return "fractional";
  }
  return "?";
}

inline std::optional<QuantizerKind> parse_quantizer_kind(const std::string& s) {
  if (s == "none") return QuantizerKind::none;
  if (s == "scaled_sign" || s == "sign") return QuantizerKind::scaled_sign;
  if (s == "fractional") return QuantizerKind::fractional;
  return std::nullopt;
}

struct QuantizerSpec {
  QuantizerKind kind = QuantizerKind::none;
  std::uint32_t P = 1;  // interval count, fractional only

  static QuantizerSpec none() { return {QuantizerKind::none, 0}; }
  static QuantizerSpec scaled_sign() { return {QuantizerKind::scaled_sign, 1}; }
  static QuantizerSpec fractional(std::uint32_t P) {
    require(P >= 1 && P <= 65535, "QuantizerSpec: P must be in [1, 65535]");
    return {QuantizerKind::fractional, P};
  }
  /// Fractional quantizer spending q bits per value: 1 sign bit plus q-1
  /// interval-index bits, i.e. P = 2^(q-1).
  static QuantizerSpec fractional_bits(unsigned q) {
    require(q >= 1 && q <= 17, "QuantizerSpec: q must be in [1, 17]");
    return fractional(std::uint32_t{1} << (q - 1));
  }

  unsigned index_bits() const { return kind == QuantizerKind::fractional ? ceil_log2(P) : 0; }

  /// Wire bits per transmitted value.
  unsigned bits_per_value() const {
    switch (kind) {
      case QuantizerKind::none: return 32;
      case QuantizerKind::scaled_sign: return 1;
      case QuantizerKind::fractional: return index_bits() + 1;
    }
    return 32;
  }

  /// Level-table entries carried in the payload.
  std::uint32_t table_size() const {
    switch (kind) {
      case QuantizerKind::none: return 0;
      case QuantizerKind::scaled_sign: return 1;
      case QuantizerKind::fractional: return P;
    }
    return 0;
  }
};

/// (||u||_1 / n) * sign(u_i), with sign(0) = +1.
inline std::vector<double> scaled_sign_quantize(std::span<const double> u) {
  require(!u.empty(), "scaled_sign_quantize: empty block");
  double l1 = 0.0;
  for (double x : u) l1 += std::abs(x);
  const double scale = l1 / static_cast<double>(u.size());
  std::vector<double> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] < 0.0 ? -scale : scale;
  return out;
}

/// Geometric-interval magnitude quantization of a zero-free block.
///
/// With u_max = max|u|, u_min = min|u| and sigma = (u_min/u_max)^(1/P), the
/// interval I_p covers magnitudes (sigma^p u_max, sigma^(p-1) u_max]; u_min
/// falls into I_P. Each value is replaced by the mean magnitude of its
/// interval, keeping its sign, so |Q(u_i) - u_i| <= ((1 - sigma)/sigma) |u_i|.
struct FractionalQuantized {
  double sigma = 1.0;
  std::vector<double> levels;          // mu_1..mu_P (magnitudes)
  std::vector<std::uint32_t> index;    // 0-based interval per value
  std::vector<bool> negative;

  double gamma() const { return (1.0 - sigma) / sigma; }

  std::vector<double> dequantize() const {
    std::vector<double> out(index.size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = negative[i] ? -levels[index[i]] : levels[index[i]];
    return out;
  }
};

namespace detail {

/// Interval assignment and level means over the nonzero entries of u. Zero
/// entries are mapped to the smallest-magnitude interval, positive sign.
inline FractionalQuantized fractional_assign(std::span<const double> u, std::uint32_t P) {
  require(P >= 1, "fractional_quantize: P must be >= 1");
  FractionalQuantized fq;
  fq.index.assign(u.size(), P - 1);
  fq.negative.assign(u.size(), false);
  fq.levels.assign(P, 0.0);

  double u_max = 0.0, u_min = INFINITY;
  for (double x : u) {
    if (x == 0.0) continue;
    u_max = std::max(u_max, std::abs(x));
    u_min = std::min(u_min, std::abs(x));
  }
  if (u_max == 0.0) return fq;  // nothing nonzero to describe

  if (u_min == u_max) {
    // Degenerate sigma = 1: every level equals the common magnitude.
    fq.sigma = 1.0;
    std::fill(fq.levels.begin(), fq.levels.end(), u_max);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (u[i] == 0.0) continue;
      fq.index[i] = 0;
      fq.negative[i] = u[i] < 0.0;
    }
    return fq;
  }

  fq.sigma = std::pow(u_min / u_max, 1.0 / static_cast<double>(P));
  // boundary[k] = sigma^(k+1) u_max separates I_(k+1) and I_(k+2)
  std::vector<double> boundary(P - 1);
  for (std::uint32_t k = 0; k + 1 < P; ++k)
    boundary[k] = u_max * std::pow(fq.sigma, static_cast<double>(k + 1));

  std::vector<double> sum(P, 0.0);
  std::vector<std::size_t> count(P, 0);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] == 0.0) continue;
    const double a = std::abs(u[i]);
    std::uint32_t p = 0;
    if (a == u_min) {
      p = P - 1;
    } else if (a != u_max) {
      // boundaries decrease; count those at or above a
      while (p + 1 < P && a <= boundary[p]) ++p;
    }
    fq.index[i] = p;
    fq.negative[i] = u[i] < 0.0;
    sum[p] += a;
    ++count[p];
  }
  for (std::uint32_t p = 0; p < P; ++p) {
    if (count[p] > 0) {
      fq.levels[p] = sum[p] / static_cast<double>(count[p]);
    } else {
      fq.levels[p] = u_max * std::pow(fq.sigma, static_cast<double>(p) + 0.5);
    }
  }
  return fq;
}

}  // namespace detail

inline FractionalQuantized fractional_quantize(std::span<const double> u, std::uint32_t P) {
  require(!u.empty(), "fractional_quantize: empty block");
  for (double x : u) require(x != 0.0, "fractional_quantize: zero value present");
  return detail::fractional_assign(u, P);
}

/// Values as they appear on the wire: a level table (float32), a code per
/// value, and the dequantized values both ends agree on.
struct WireQuantized {
  std::vector<float> table;
  std::vector<std::uint32_t> codes;  // sign bit at position index_bits, then index
  std::vector<double> dequantized;
};

inline double dequantize_code(const QuantizerSpec& spec, std::span<const float> table,
                              std::uint32_t code) {
  if (spec.kind == QuantizerKind::none) {
    float f;
    std::memcpy(&f, &code, sizeof f);
    return static_cast<double>(f);
  }
  const unsigned ib = spec.index_bits();
  const bool neg = (code >> ib) & 1u;
  const std::uint32_t idx = code & ((std::uint32_t{1} << ib) - 1);
  const double mag = static_cast<double>(table[idx]);
  return neg ? -mag : mag;
}

/// Quantizes one payload's worth of values with a single level table.
inline WireQuantized wire_quantize(std::span<const double> values, const QuantizerSpec& spec) {
  WireQuantized wq;
  wq.codes.resize(values.size());
  wq.dequantized.resize(values.size());
  switch (spec.kind) {
    case QuantizerKind::none:
      for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, sizeof bits);
        wq.codes[i] = bits;
      }
      break;
    case QuantizerKind::scaled_sign: {
      const double scale = values.empty() ? 0.0 : scaled_sign_quantize(values).front();
      wq.table = {static_cast<float>(std::abs(scale))};
      for (std::size_t i = 0; i < values.size(); ++i) wq.codes[i] = values[i] < 0.0 ? 1u : 0u;
      break;
    }
    case QuantizerKind::fractional: {
      auto fq = detail::fractional_assign(values, spec.P);
      wq.table.resize(spec.P);
      for (std::uint32_t p = 0; p < spec.P; ++p) wq.table[p] = static_cast<float>(fq.levels[p]);
      const unsigned ib = spec.index_bits();
      for (std::size_t i = 0; i < values.size(); ++i)
        wq.codes[i] = (fq.negative[i] ? (std::uint32_t{1} << ib) : 0u) | fq.index[i];
      break;
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    wq.dequantized[i] = dequantize_code(spec, wq.table, wq.codes[i]);
  return wq;
}

}  // namespace tcs
