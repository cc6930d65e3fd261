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
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "tcs/tensor.hpp"

namespace tcs {

enum class Scheme { none, topk, randk, tcs };
enum class Fairness { none, plf, lf };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::none: return "none";
    case Scheme::topk: return "topk";
    case Scheme::randk: return "randk";
    case Scheme::tcs: return "tcs";
  }
  return "?";
}

inline const char* to_string(Fairness f) {
  switch (f) {
    case Fairness::none: return "none";
    case Fairness::plf: return "plf";
    case Fairness::lf: return "lf";
  }
  return "?";
}

inline std::optional<Scheme> parse_scheme(const std::string& s) {
  if (s == "none" || s == "dense") return Scheme::none;
  if (s == "topk") return Scheme::topk;
  if (s == "randk") return Scheme::randk;
  if (s == "tcs") return Scheme::tcs;
  return std::nullopt;
}

inline std::optional<Fairness> parse_fairness(const std::string& s) {
  if (s == "none") return Fairness::none;
  if (s == "plf") return Fairness::plf;
  if (s == "lf") return Fairness::lf;
  return std::nullopt;
}

/// Round-half-up count from a ratio.
inline std::size_t count_from_ratio(double phi, std::size_t d) {
  return static_cast<std::size_t>(std::floor(phi * static_cast<double>(d) + 0.5));
}

struct CompressorConfig {
  Scheme scheme = Scheme::tcs;
  double phi_global = 0.01;
  double phi_local = 0.001;
  Fairness fairness = Fairness::none;
  double phi_min_global = 0.0;
  double phi_min_local = 0.0;

  /// K_global (for topk/randk: K). Never below 1.
  std::size_t k_global(std::size_t d) const {
    return std::clamp<std::size_t>(count_from_ratio(phi_global, d), 1, d);
  }
  std::size_t k_local(std::size_t d) const {
    return scheme == Scheme::tcs ? count_from_ratio(phi_local, d) : 0;
  }

  /// Empty string when valid, else "<field>: <reason>".
  std::string validate() const {
    if (scheme == Scheme::none) return {};
    if (!(phi_global > 0.0 && phi_global <= 1.0)) return "phi_global: must be in (0, 1]";
    if (scheme == Scheme::tcs) {
      if (!(phi_local >= 0.0 && phi_local < 1.0)) return "phi_local: must be in [0, 1)";
      if (!(phi_local < phi_global)) return "phi_local: must be < phi_global when scheme=tcs";
    }
    if (fairness != Fairness::none) {
      if (scheme != Scheme::tcs) return "fairness: layer-wise fairness requires scheme=tcs";
      if (!(phi_min_global >= 0.0 && phi_min_global <= phi_global))
        return "phi_min_global: must be in [0, phi_global]";
      if (fairness == Fairness::lf && !(phi_min_local >= 0.0 && phi_min_local <= phi_local))
        return "phi_min_local: must be in [0, phi_local]";
    }
    return {};
  }
};

/// Per-client accumulated compression residual.
struct ErrorState {
  ParamVector residual;

  static ErrorState zeros(LayoutPtr layout) { return {ParamVector::zeros(std::move(layout))}; }
};

/// A masked update split into the part whose positions the receiver already
/// knows (global) and the part whose positions travel with the values (local).
struct SparseUpdate {
  Mask global;
  std::vector<double> global_values;
  Mask local;
  std::vector<double> local_values;

  const LayoutPtr& layout() const { return global.layout(); }
  std::size_t nnz() const { return global.popcount() + local.popcount(); }

  Mask support() const { return mask_union(global, local); }

  ParamVector to_dense() const {
    std::vector<double> out(global.dim(), 0.0);
    for (std::size_t k = 0; k < global_values.size(); ++k) out[global.indices()[k]] = global_values[k];
    for (std::size_t k = 0; k < local_values.size(); ++k) out[local.indices()[k]] = local_values[k];
    return ParamVector(global.layout(), std::move(out));
  }
};

struct CompressResult {
  SparseUpdate sent;
  ErrorState error;
};

namespace detail {

/// Ordering used by every magnitude selection: larger |v| first, lower index
/// on ties.
struct MagnitudeOrder {
  std::span<const double> v;
  bool operator()(std::uint32_t a, std::uint32_t b) const {
    const double ma = std::abs(v[a]), mb = std::abs(v[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  }
};

/// Moves the top-k candidates (by MagnitudeOrder) to the front and returns them
/// sorted by index.
inline std::vector<std::uint32_t> take_top(std::span<const double> v,
                                           std::vector<std::uint32_t> candidates,
                                           std::size_t k) {
  require(k <= candidates.size(), "take_top: k exceeds candidate count");
  MagnitudeOrder order{v};
  if (k < candidates.size())
    std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                     candidates.end(), order);
  candidates.resize(k);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

/// Top-K over indices not in `excluded`, with per-layer minimum counts taken
/// first and the remaining budget filled by global magnitude order.
inline Mask select_top(const ParamVector& v, std::size_t K, const Mask* excluded,
                       std::span<const std::size_t> floors) {
  const auto& layout = *v.layout();
  const std::size_t d = v.size();
  std::vector<bool> blocked(d, false);
  if (excluded != nullptr) {
    require_same_layout(v.layout(), excluded->layout(), "select_top");
    for (auto i : excluded->indices()) blocked[i] = true;
  }

  std::vector<std::uint32_t> chosen;
  if (!floors.empty()) {
    require(floors.size() == layout.num_layers(), "select_top: one floor per layer required");
    std::size_t floor_total = 0;
    for (std::size_t l = 0; l < floors.size(); ++l) floor_total += floors[l];
    require(floor_total <= K, "select_top: layer floors exceed total budget");
    for (std::size_t l = 0; l < layout.num_layers(); ++l) {
      if (floors[l] == 0) continue;
      std::vector<std::uint32_t> cand;
      for (std::size_t i = layout.layer_begin(l); i < layout.layer_end(l); ++i)
        if (!blocked[i]) cand.push_back(static_cast<std::uint32_t>(i));
      require(floors[l] <= cand.size(), "select_top: layer floor exceeds layer candidates");
      for (auto i : take_top(v.values(), std::move(cand), floors[l])) {
        chosen.push_back(i);
        blocked[i] = true;
      }
    }
  }

  std::vector<std::uint32_t> rest;
  rest.reserve(d);
  for (std::uint32_t i = 0; i < d; ++i)
    if (!blocked[i]) rest.push_back(i);
  const std::size_t remaining = K - chosen.size();
  require(remaining <= rest.size(), "select_top: K exceeds available indices");
  auto fill = take_top(v.values(), std::move(rest), remaining);
  chosen.insert(chosen.end(), fill.begin(), fill.end());
  std::sort(chosen.begin(), chosen.end());
  return Mask(v.layout(), std::move(chosen));
}

}  // namespace detail

/// Exactly K indices of largest |v_i|; ties go to the lower index, so an
/// all-zero input yields {0, ..., K-1}.
inline Mask s_top(const ParamVector& v, std::size_t K) {
  require(K <= v.size(), "s_top: K > d");
  return detail::select_top(v, K, nullptr, {});
}

/// Per-layer counts ceil(phi_min * d_l), capped at d_l.
inline std::vector<std::size_t> layer_floors(const LayerLayout& layout, double phi_min) {
  std::vector<std::size_t> out(layout.num_layers());
  for (std::size_t l = 0; l < out.size(); ++l) {
    const double want = phi_min * static_cast<double>(layout.layer_size(l));
    auto c = static_cast<std::size_t>(std::ceil(want - 1e-9));
    out[l] = std::min(c, layout.layer_size(l));
  }
  return out;
}

/// Layer-fair top-K: every layer l gets at least per_layer_floor[l] entries.
inline Mask lf_mask(const ParamVector& v, std::size_t K_total,
                    std::span<const std::size_t> per_layer_floor) {
  require(K_total <= v.size(), "lf_mask: K_total > d");
  const auto& layout = *v.layout();
  require(per_layer_floor.size() == layout.num_layers(), "lf_mask: one floor per layer required");
  for (std::size_t l = 0; l < layout.num_layers(); ++l)
    require(per_layer_floor[l] <= layout.layer_size(l), "lf_mask: floor exceeds layer size");
  return detail::select_top(v, K_total, nullptr, per_layer_floor);
}

/// Top-K with error feedback: the buffered vector update + residual is split
/// into the sent top-K entries and the new residual.
inline CompressResult topk_compress(const ParamVector& update, std::size_t K,
                                    const ErrorState& err) {
  ParamVector buffered = add(update, err.residual);
  Mask m = s_top(buffered, K);
  Mask rest = mask_complement(m);
  SparseUpdate su{Mask(update.layout()), {}, m, gather(buffered, m)};
  return {std::move(su), ErrorState{apply_mask(buffered, rest)}};
}

/// Shared-seed random mask: depends only on (seed, round), never on the client.
inline Mask randk_mask(const LayoutPtr& layout, std::size_t K, std::uint64_t round,
                       std::uint64_t root_seed) {
  const std::size_t d = layout->dim();
  require(K <= d, "randk_mask: K > d");
  RngStream rng = substream(root_seed, "randk", 0, round);
  // Floyd's sampling: K distinct draws in O(K).
  std::unordered_set<std::uint32_t> picked;
  picked.reserve(K * 2);
  for (std::size_t j = d - K; j < d; ++j) {
    auto t = static_cast<std::uint32_t>(rng.below(j + 1));
    if (!picked.insert(t).second) picked.insert(static_cast<std::uint32_t>(j));
  }
  std::vector<std::uint32_t> idx(picked.begin(), picked.end());
  std::sort(idx.begin(), idx.end());
  return Mask(layout, std::move(idx));
}

/// Compression onto a mask the receiver already knows (rand-K); no positions
/// are transmitted.
inline CompressResult shared_mask_compress(const ParamVector& update, const Mask& mask,
                                           const ErrorState& err) {
  ParamVector buffered = add(update, err.residual);
  SparseUpdate su{mask, gather(buffered, mask), Mask(update.layout()), {}};
  return {std::move(su), ErrorState{apply_mask(buffered, mask_complement(mask))}};
}

inline Mask tcs_global_mask(const ParamVector& prev_global_delta, std::size_t K_global,
                            Fairness fairness, double phi_min_global) {
  if (fairness == Fairness::none) return s_top(prev_global_delta, K_global);
  auto floors = layer_floors(*prev_global_delta.layout(), phi_min_global);
  return lf_mask(prev_global_delta, K_global, floors);
}

/// Client mask over the complement of the global mask. Layer floors apply
/// only under full layer-wise fairness (lf), capped by what the global mask
/// leaves free in each layer.
inline Mask tcs_local_mask(const ParamVector& buffered, const Mask& global_mask,
                           std::size_t K_local, Fairness fairness, double phi_min_local) {
  require_same_layout(buffered.layout(), global_mask.layout(), "tcs_local_mask");
  require(K_local <= buffered.size() - global_mask.popcount(),
          "tcs_local_mask: K_local > d - K_global");
  if (fairness != Fairness::lf || K_local == 0)
    return detail::select_top(buffered, K_local, &global_mask, {});

  const auto& layout = *buffered.layout();
  auto floors = layer_floors(layout, phi_min_local);
  for (std::size_t l = 0; l < floors.size(); ++l)
    floors[l] = std::min(floors[l], layout.layer_size(l) - global_mask.layer_count(l));
  return detail::select_top(buffered, K_local, &global_mask, floors);
}

inline CompressResult tcs_compress(const ParamVector& update, const Mask& global_mask,
                                   const CompressorConfig& cfg, const ErrorState& err) {
  require_same_layout(update.layout(), global_mask.layout(), "tcs_compress");
  ParamVector buffered = add(update, err.residual);
  Mask local = tcs_local_mask(buffered, global_mask, cfg.k_local(update.size()), cfg.fairness,
                              cfg.phi_min_local);
  Mask rest = mask_complement(mask_union(global_mask, local));
  SparseUpdate su{global_mask, gather(buffered, global_mask), local, gather(buffered, local)};
  return {std::move(su), ErrorState{apply_mask(buffered, rest)}};
}

}  // namespace tcs
