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

#include <cmath>
#include <cstddef>

#include "tcs/compressors.hpp"

namespace tcs {

/// How a transmitted position is priced.
enum class PositionCost {
  block,  // log2(1/phi) + 2 bits, block coding
  log2d,  // log2(d) bits, plain index
};

/// Analytic uplink bits per parameter per local iteration.
///
///   tcs:   [q (phi_l + phi_g) + pos(phi_l) phi_l] / H
///   topk:  [phi (q + pos(phi))] / H
///   randk: [phi q] / H        (mask shared through the seed)
///   none:  q / H
///
/// with pos(phi) = log2(1/phi) + 2 (block) or log2 d. Uses the exact
/// logarithm; measured payloads pay ceil(log2 block_size) instead.
inline double bit_budget(Scheme scheme, double q, double phi_global, double phi_local, double H,
                         std::size_t d = 0, PositionCost cost = PositionCost::block) {
  require(H >= 1.0, "bit_budget: H must be >= 1");
  auto pos = [&](double phi) {
    if (cost == PositionCost::log2d) {
      require(d >= 1, "bit_budget: log2d pricing needs d");
      return std::log2(static_cast<double>(d));
    }
    return std::log2(1.0 / phi) + 2.0;
  };
  switch (scheme) {
    case Scheme::tcs: {
      double bits = q * (phi_local + phi_global);
      if (phi_local > 0.0) bits += pos(phi_local) * phi_local;
      return bits / H;
    }
    case Scheme::topk: return phi_global * (q + pos(phi_global)) / H;
    case Scheme::randk: return phi_global * q / H;
    case Scheme::none: return q / H;
  }
  return 0.0;
}

/// Measured counterpart: total uplink bits over (d * H * clients).
inline double measured_bits_per_param(double total_bits, std::size_t d, std::size_t H,
                                      std::size_t clients = 1) {
  return total_bits / (static_cast<double>(d) * static_cast<double>(H) * static_cast<double>(clients));
}

}  // namespace tcs
