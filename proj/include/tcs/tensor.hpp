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
#include <cstddef>
#include <cstdint>
#include <iterator>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tcs {

/// Raised when a caller breaks a documented precondition (shape mismatch,
/// out-of-range count, non-finite value at an API boundary).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

/// Per-layer parameter counts of a flat model vector.
class LayerLayout {
 public:
  explicit LayerLayout(std::vector<std::size_t> layer_sizes)
      : sizes_(std::move(layer_sizes)) {
    require(!sizes_.empty(), "LayerLayout: at least one layer required");
    offsets_.reserve(sizes_.size() + 1);
    offsets_.push_back(0);
    for (std::size_t s : sizes_) {
      require(s >= 1, "LayerLayout: every layer needs >= 1 parameter");
      offsets_.push_back(offsets_.back() + s);
    }
    require(offsets_.back() <= UINT32_MAX, "LayerLayout: d must fit in 32 bits");
  }

  static std::shared_ptr<const LayerLayout> make(std::vector<std::size_t> sizes) {
    return std::make_shared<const LayerLayout>(std::move(sizes));
  }

  std::size_t dim() const { return offsets_.back(); }
  std::size_t num_layers() const { return sizes_.size(); }
  std::size_t layer_size(std::size_t l) const { return sizes_.at(l); }
  std::size_t layer_begin(std::size_t l) const { return offsets_.at(l); }
  std::size_t layer_end(std::size_t l) const { return offsets_.at(l + 1); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

  /// Layer owning flat index i.
  std::size_t layer_of(std::size_t i) const {
    require(i < dim(), "LayerLayout::layer_of: index out of range");
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), i);
    return static_cast<std::size_t>(std::distance(offsets_.begin(), it)) - 1;
  }

  friend bool operator==(const LayerLayout& a, const LayerLayout& b) {
    return a.sizes_ == b.sizes_;
  }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

inline bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
  return a == b || (a && b && *a == *b);
}

inline void require_same_layout(const LayoutPtr& a, const LayoutPtr& b,
                                const char* where) {
  require(same_layout(a, b), std::string(where) + ": layout mismatch");
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Flat real-valued vector laid out over model layers. Entries are finite
/// whenever a ParamVector is constructed.
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(LayoutPtr layout)
      : layout_(std::move(layout)), values_(layout_->dim(), 0.0) {}

  ParamVector(LayoutPtr layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {
    require(layout_ != nullptr, "ParamVector: null layout");
    require(values_.size() == layout_->dim(), "ParamVector: length != layout.d");
    require(all_finite(values_), "ParamVector: non-finite entry");
  }

  static ParamVector zeros(LayoutPtr layout) { return ParamVector(std::move(layout)); }

  std::size_t size() const { return values_.size(); }
  const LayoutPtr& layout() const { return layout_; }
  std::span<const double> values() const& { return values_; }
  std::span<const double> values() const&& = delete;  // would dangle
  const std::vector<double>& vec() const& { return values_; }
  std::vector<double> vec() && { return std::move(values_); }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<const double> layer(std::size_t l) const {
    return std::span<const double>(values_).subspan(layout_->layer_begin(l),
                                                     layout_->layer_size(l));
  }

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return same_layout(a.layout_, b.layout_) && a.values_ == b.values_;
  }

 private:
  LayoutPtr layout_;
  std::vector<double> values_;
};

/// Elementwise a + b.
inline ParamVector add(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a.layout(), b.layout(), "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return ParamVector(a.layout(), std::move(out));
}

/// Elementwise a - b.
inline ParamVector sub(const ParamVector& a, const ParamVector& b) {
  require_same_layout(a.layout(), b.layout(), "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return ParamVector(a.layout(), std::move(out));
}

inline ParamVector scale(const ParamVector& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a[i];
  return ParamVector(a.layout(), std::move(out));
}

inline std::size_t support_size(const ParamVector& v) {
  return static_cast<std::size_t>(
      std::count_if(v.vec().begin(), v.vec().end(), [](double x) { return x != 0.0; }));
}

/// Binary selector over parameter indices, held as a strictly increasing
/// index list.
class Mask {
 public:
  Mask() = default;

  explicit Mask(LayoutPtr layout) : layout_(std::move(layout)) {}

  Mask(LayoutPtr layout, std::vector<std::uint32_t> indices)
      : layout_(std::move(layout)), idx_(std::move(indices)) {
    require(layout_ != nullptr, "Mask: null layout");
    for (std::size_t k = 0; k < idx_.size(); ++k) {
      require(idx_[k] < layout_->dim(), "Mask: index out of range");
      require(k == 0 || idx_[k - 1] < idx_[k], "Mask: indices not strictly increasing");
    }
  }

  static Mask full(LayoutPtr layout) {
    std::vector<std::uint32_t> all(layout->dim());
    std::iota(all.begin(), all.end(), 0u);
    return Mask(std::move(layout), std::move(all));
  }

  static Mask from_dense(LayoutPtr layout, const std::vector<bool>& bits) {
    require(bits.size() == layout->dim(), "Mask::from_dense: length != d");
    std::vector<std::uint32_t> idx;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) idx.push_back(static_cast<std::uint32_t>(i));
    return Mask(std::move(layout), std::move(idx));
  }

  const LayoutPtr& layout() const { return layout_; }
  std::size_t dim() const { return layout_->dim(); }
  std::size_t popcount() const { return idx_.size(); }
  bool empty() const { return idx_.empty(); }
  const std::vector<std::uint32_t>& indices() const& { return idx_; }
  std::vector<std::uint32_t> indices() && { return std::move(idx_); }

  /// Sparsification ratio ||m||_1 / d.
  double ratio() const {
    return static_cast<double>(idx_.size()) / static_cast<double>(dim());
  }

  bool contains(std::uint32_t i) const {
    return std::binary_search(idx_.begin(), idx_.end(), i);
  }

  std::vector<bool> to_dense() const {
    std::vector<bool> bits(dim(), false);
    for (auto i : idx_) bits[i] = true;
    return bits;
  }

  /// Selected count inside layer l.
  std::size_t layer_count(std::size_t l) const {
    auto lo = std::lower_bound(idx_.begin(), idx_.end(), layout_->layer_begin(l));
    auto hi = std::lower_bound(idx_.begin(), idx_.end(), layout_->layer_end(l));
    return static_cast<std::size_t>(hi - lo);
  }

  friend bool operator==(const Mask& a, const Mask& b) {
    return same_layout(a.layout_, b.layout_) && a.idx_ == b.idx_;
  }

 private:
  LayoutPtr layout_;
  std::vector<std::uint32_t> idx_;
};

/// result_i = v_i where m selects i, 0 elsewhere. Entries are copied, never
/// recomputed.
inline ParamVector apply_mask(const ParamVector& v, const Mask& m) {
  require_same_layout(v.layout(), m.layout(), "apply_mask");
  std::vector<double> out(v.size(), 0.0);
  for (auto i : m.indices()) out[i] = v[i];
  return ParamVector(v.layout(), std::move(out));
}

/// Values of v at the selected indices, in ascending index order.
inline std::vector<double> gather(const ParamVector& v, const Mask& m) {
  require_same_layout(v.layout(), m.layout(), "gather");
  std::vector<double> out;
  out.reserve(m.popcount());
  for (auto i : m.indices()) out.push_back(v[i]);
  return out;
}

inline Mask mask_union(const Mask& a, const Mask& b) {
  require_same_layout(a.layout(), b.layout(), "mask_union");
  std::vector<std::uint32_t> out;
  out.reserve(a.popcount() + b.popcount());
  std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(),
                 b.indices().end(), std::back_inserter(out));
  return Mask(a.layout(), std::move(out));
}

inline Mask mask_complement(const Mask& a) {
  std::vector<std::uint32_t> out;
  out.reserve(a.dim() - a.popcount());
  std::size_t k = 0;
  const auto& idx = a.indices();
  for (std::uint32_t i = 0; i < a.dim(); ++i) {
    if (k < idx.size() && idx[k] == i) {
      ++k;
      continue;
    }
    out.push_back(i);
  }
  return Mask(a.layout(), std::move(out));
}

inline bool masks_disjoint(const Mask& a, const Mask& b) {
  require_same_layout(a.layout(), b.layout(), "masks_disjoint");
  auto ia = a.indices().begin(), ib = b.indices().begin();
  while (ia != a.indices().end() && ib != b.indices().end()) {
    if (*ia == *ib) return false;
    if (*ia < *ib) ++ia; else ++ib;
  }
  return true;
}

/// Number of indices selected by exactly one of a, b.
inline std::size_t hamming_distance(const Mask& a, const Mask& b) {
  require_same_layout(a.layout(), b.layout(), "hamming_distance");
  std::vector<std::uint32_t> diff;
  std::set_symmetric_difference(a.indices().begin(), a.indices().end(),
                                b.indices().begin(), b.indices().end(),
                                std::back_inserter(diff));
  return diff.size();
}

// -----------------------------------------------------------------------------
// Deterministic random streams

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

/// Seeded generator keyed by (root seed, purpose, client, round). Draw
/// routines are written out here rather than taken from <random>'s
/// distributions, whose output is implementation-defined.
class RngStream {
 public:
  RngStream(std::uint64_t root_seed, std::string_view purpose, std::uint64_t client,
            std::uint64_t round) {
    std::uint64_t s = root_seed;
    std::uint64_t mix = splitmix64(s);
    s ^= fnv1a(purpose);
    mix ^= splitmix64(s);
    s ^= client * 0xD1B54A32D192ED03ull;
    mix ^= splitmix64(s);
    s ^= round * 0xAEF17502108EF2D9ull;
    mix ^= splitmix64(s);
    state_ = mix;
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    require(n > 0, "RngStream::below: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline RngStream substream(std::uint64_t root_seed, std::string_view purpose,
                           std::uint64_t client_id, std::uint64_t round) {
  return RngStream(root_seed, purpose, client_id, round);
}

}  // namespace tcs
