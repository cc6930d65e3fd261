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

// Small classifiers with hand-derived gradients: multinomial logistic
// regression and a one-hidden-layer ReLU MLP, both trained with softmax
// cross-entropy plus (lambda/2)||theta||^2.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcs/tensor.hpp"

namespace tcs {

class DatasetFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;  // row-major, size() * num_features
  std::vector<std::uint32_t> labels;

  std::size_t size() const { return labels.size(); }

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * num_features, num_features);
  }

  Dataset subset(std::span<const std::uint32_t> rows) const {
    Dataset out{num_features, num_classes, {}, {}};
    out.features.reserve(rows.size() * num_features);
    out.labels.reserve(rows.size());
    for (auto r : rows) {
      auto x = row(r);
      out.features.insert(out.features.end(), x.begin(), x.end());
      out.labels.push_back(labels[r]);
    }
    return out;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// A batch is a list of row ids into a dataset.
struct Batch {
  const Dataset* data = nullptr;
  std::span<const std::uint32_t> rows;
};

enum class ModelKind { logreg, mlp };

inline const char* to_string(ModelKind k) { return k == ModelKind::logreg ? "logreg" : "mlp"; }

struct ModelSpec {
  ModelKind kind = ModelKind::logreg;
  std::size_t features = 0;
  std::size_t classes = 0;
  std::size_t hidden = 0;  // mlp only

  /// logreg: [W (C x F), b (C)]; mlp: [W1 (h x F), b1 (h), W2 (C x h), b2 (C)].
  LayoutPtr make_layout() const {
    require(features >= 1 && classes >= 2, "ModelSpec: need F >= 1 and C >= 2");
    if (kind == ModelKind::logreg) return LayerLayout::make({classes * features, classes});
    require(hidden >= 1, "ModelSpec: mlp needs hidden >= 1");
    return LayerLayout::make({hidden * features, hidden, classes * hidden, classes});
  }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
inline ParamVector init_params(const ModelSpec& spec, const LayoutPtr& layout, std::uint64_t seed) {
  RngStream rng = substream(seed, "init", 0, 0);
  std::vector<double> v(layout->dim());
  std::vector<double> fan_in;
  if (spec.kind == ModelKind::logreg) {
    fan_in = {double(spec.features), double(spec.features)};
  } else {
    fan_in = {double(spec.features), double(spec.features), double(spec.hidden), double(spec.hidden)};
  }
  for (std::size_t l = 0; l < layout->num_layers(); ++l) {
    const double a = 1.0 / std::sqrt(fan_in[l]);
    for (std::size_t i = layout->layer_begin(l); i < layout->layer_end(l); ++i)
      v[i] = rng.uniform(-a, a);
  }
  return ParamVector(layout, std::move(v));
}

struct Model {
  ModelSpec spec;
  LayoutPtr layout;
  ParamVector params;

  static Model create(const ModelSpec& spec, std::uint64_t seed) {
    auto layout = spec.make_layout();
    auto params = init_params(spec, layout, seed);
    return Model{spec, layout, std::move(params)};
  }
};

namespace detail {

inline void check_batch(const ModelSpec& spec, const ParamVector& params, const Batch& b) {
  require(b.data != nullptr && !b.rows.empty(), "model: batch must be non-empty");
  require(b.data->num_features == spec.features, "model: feature dimension mismatch");
  require(params.size() == spec.make_layout()->dim(), "model: parameter length mismatch");
  for (auto r : b.rows) {
    require(r < b.data->size(), "model: batch row out of range");
    require(b.data->labels[r] < spec.classes, "model: label out of range");
  }
}

/// Softmax of logits in place; returns log-sum-exp.
inline double softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    s += v;
  }
  for (double& v : z) v /= s;
  return m + std::log(s);
}

/// Forward + optional backward over a batch. Accumulates the mean data loss
/// and, when grad is non-null, the mean data gradient.
inline double evaluate(const ModelSpec& spec, std::span<const double> th, const Batch& b,
                       std::vector<double>* grad) {
  const std::size_t F = spec.features, C = spec.classes, H = spec.hidden;
  const double inv_n = 1.0 / static_cast<double>(b.rows.size());
  double loss = 0.0;
  std::vector<double> z(C), hid(H), act(H), dz(C), dh(H);

  for (auto r : b.rows) {
    auto x = b.data->row(r);
    const std::uint32_t y = b.data->labels[r];

    if (spec.kind == ModelKind::logreg) {
      const double* W = th.data();
      const double* bias = th.data() + C * F;
      for (std::size_t c = 0; c < C; ++c) {
        double s = bias[c];
        for (std::size_t f = 0; f < F; ++f) s += W[c * F + f] * x[f];
        z[c] = s;
      }
      const double zy = z[y];
      const double lse = softmax_inplace(z);
      loss += (lse - zy) * inv_n;
      if (grad) {
        double* gW = grad->data();
        double* gb = grad->data() + C * F;
        for (std::size_t c = 0; c < C; ++c) {
          const double dc = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
          for (std::size_t f = 0; f < F; ++f) gW[c * F + f] += dc * x[f];
          gb[c] += dc;
        }
      }
      continue;
    }

    const double* W1 = th.data();
    const double* b1 = W1 + H * F;
    const double* W2 = b1 + H;
    const double* b2 = W2 + C * H;
    for (std::size_t j = 0; j < H; ++j) {
      double s = b1[j];
      for (std::size_t f = 0; f < F; ++f) s += W1[j * F + f] * x[f];
      hid[j] = s;
      act[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t c = 0; c < C; ++c) {
      double s = b2[c];
      for (std::size_t j = 0; j < H; ++j) s += W2[c * H + j] * act[j];
      z[c] = s;
    }
    const double zy = z[y];
    const double lse = softmax_inplace(z);
    loss += (lse - zy) * inv_n;
    if (!grad) continue;

    double* gW1 = grad->data();
    double* gb1 = gW1 + H * F;
    double* gW2 = gb1 + H;
    double* gb2 = gW2 + C * H;
    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      dz[c] = (z[c] - (c == y ? 1.0 : 0.0)) * inv_n;
      for (std::size_t j = 0; j < H; ++j) {
        gW2[c * H + j] += dz[c] * act[j];
        dh[j] += W2[c * H + j] * dz[c];
      }
      gb2[c] += dz[c];
    }
    for (std::size_t j = 0; j < H; ++j) {
      if (hid[j] <= 0.0) continue;  // ReLU'(0) = 0
      for (std::size_t f = 0; f < F; ++f) gW1[j * F + f] += dh[j] * x[f];
      gb1[j] += dh[j];
    }
  }
  return loss;
}

inline double l2_half(std::span<const double> th) {
  double s = 0.0;
  for (double v : th) s += v * v;
  return 0.5 * s;
}

}  // namespace detail

/// Mean cross-entropy over the batch plus (lambda/2)||theta||^2.
inline double loss(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                   double weight_decay = 0.0) {
  detail::check_batch(spec, params, batch);
  double l = detail::evaluate(spec, params.values(), batch, nullptr);
  if (weight_decay > 0.0) l += weight_decay * detail::l2_half(params.values());
  return l;
}

/// Gradient of loss(); the weight-decay part is lambda * theta.
inline ParamVector gradient(const ModelSpec& spec, const ParamVector& params, const Batch& batch,
                            double weight_decay = 0.0) {
  detail::check_batch(spec, params, batch);
  std::vector<double> g(params.size(), 0.0);
  detail::evaluate(spec, params.values(), batch, &g);
  if (weight_decay != 0.0)
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight_decay * params[i];
  return ParamVector(params.layout(), std::move(g));
}

struct LossAndGradient {
  double loss;
  ParamVector grad;
};

inline LossAndGradient loss_and_gradient(const ModelSpec& spec, const ParamVector& params,
                                         const Batch& batch, double weight_decay = 0.0) {
  detail::check_batch(spec, params, batch);
  std::vector<double> g(params.size(), 0.0);
  double l = detail::evaluate(spec, params.values(), batch, &g);
  if (weight_decay != 0.0) {
    l += weight_decay * detail::l2_half(params.values());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight_decay * params[i];
  }
  return {l, ParamVector(params.layout(), std::move(g))};
}

/// Unchecked variant for training loops: writes the gradient into g (resized)
/// and never validates finiteness, leaving divergence handling to the caller.
inline double loss_and_gradient_raw(const ModelSpec& spec, std::span<const double> th,
                                    const Batch& batch, double weight_decay,
                                    std::vector<double>& g) {
  require(batch.data != nullptr && !batch.rows.empty(), "model: batch must be non-empty");
  g.assign(th.size(), 0.0);
  double l = detail::evaluate(spec, th, batch, &g);
  if (weight_decay != 0.0) {
    l += weight_decay * detail::l2_half(th);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += weight_decay * th[i];
  }
  return l;
}

inline double loss(const Model& m, const Batch& b, double weight_decay = 0.0) {
  return loss(m.spec, m.params, b, weight_decay);
}

inline ParamVector gradient(const Model& m, const Batch& b, double weight_decay = 0.0) {
  return gradient(m.spec, m.params, b, weight_decay);
}

inline std::uint32_t predict(const ModelSpec& spec, std::span<const double> th,
                             std::span<const double> x) {
  const std::size_t F = spec.features, C = spec.classes, H = spec.hidden;
  std::vector<double> z(C);
  if (spec.kind == ModelKind::logreg) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = th[C * F + c];
      for (std::size_t f = 0; f < F; ++f) s += th[c * F + f] * x[f];
      z[c] = s;
    }
  } else {
    std::vector<double> act(H);
    const std::size_t b1 = H * F, W2 = b1 + H, b2 = W2 + C * H;
    for (std::size_t j = 0; j < H; ++j) {
      double s = th[b1 + j];
      for (std::size_t f = 0; f < F; ++f) s += th[j * F + f] * x[f];
      act[j] = s > 0.0 ? s : 0.0;
    }
    for (std::size_t c = 0; c < C; ++c) {
      double s = th[b2 + c];
      for (std::size_t j = 0; j < H; ++j) s += th[W2 + c * H + j] * act[j];
      z[c] = s;
    }
  }
  return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

/// Fraction of rows classified correctly.
inline double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (predict(spec, params.values(), ds.row(i)) == ds.labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ds.size());
}

/// Gaussian blobs: one center per class (coordinates N(0, 2^2)), samples
/// center + spread * N(0, I), labels assigned round-robin so class counts
/// differ by at most one.
inline Dataset synth_dataset(std::size_t C, std::size_t F, std::size_t n, double cluster_spread,
                             std::uint64_t seed) {
  require(C >= 2 && F >= 1 && n >= C, "synth_dataset: need C >= 2, F >= 1, n >= C");
  require(cluster_spread >= 0.0, "synth_dataset: cluster_spread must be >= 0");
  RngStream centers_rng = substream(seed, "synth-centers", 0, 0);
  std::vector<double> centers(C * F);
  for (double& c : centers) c = 2.0 * centers_rng.normal();

  RngStream rng = substream(seed, "synth-samples", 0, 0);
  Dataset ds{F, C, std::vector<double>(n * F), std::vector<std::uint32_t>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::uint32_t>(i % C);
    ds.labels[i] = y;
    for (std::size_t f = 0; f < F; ++f)
      ds.features[i * F + f] = centers[y * F + f] + cluster_spread * rng.normal();
  }
  return ds;
}

/// Random permutation split into N shards whose sizes differ by at most one.
inline std::vector<Dataset> partition_iid(const Dataset& ds, std::size_t N, std::uint64_t seed) {
  require(N >= 1 && N <= ds.size(), "partition_iid: need 1 <= N <= n_samples");
  std::vector<std::uint32_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0u);
  RngStream rng = substream(seed, "partition", 0, 0);
  rng.shuffle(perm);
  std::vector<Dataset> shards;
  shards.reserve(N);
  const std::size_t base = ds.size() / N, extra = ds.size() % N;
  std::size_t at = 0;
  for (std::size_t k = 0; k < N; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    shards.push_back(ds.subset(std::span<const std::uint32_t>(perm).subspan(at, len)));
    at += len;
  }
  return shards;
}

/// Splits off the last n_test rows.
inline std::pair<Dataset, Dataset> split_tail(const Dataset& ds, std::size_t n_test) {
  require(n_test < ds.size(), "split_tail: n_test must leave training rows");
  std::vector<std::uint32_t> train(ds.size() - n_test), test(n_test);
  std::iota(train.begin(), train.end(), 0u);
  std::iota(test.begin(), test.end(), static_cast<std::uint32_t>(train.size()));
  return {ds.subset(train), ds.subset(test)};
}

// -----------------------------------------------------------------------------
// CSV: header "f0,...,f{F-1},label", one sample per row.

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_dataset_csv(std::ostream& os, const Dataset& ds) {
  for (std::size_t f = 0; f < ds.num_features; ++f) os << 'f' << f << ',';
  os << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) os << format_real(v) << ',';
    os << ds.labels[i] << '\n';
  }
}

/// Parses the CSV; num_classes defaults to max label + 1 (at least 2).
inline Dataset read_dataset_csv(std::istream& is, std::optional<std::size_t> num_classes = {}) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
  };
  auto strip_cr = [](std::string& s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
  };

  std::string line;
  if (!std::getline(is, line)) throw DatasetFormatError("dataset csv: missing header");
  strip_cr(line);
  auto header = split(line);
  if (header.size() < 2 || header.back() != "label")
    throw DatasetFormatError("dataset csv: header must be f0,...,f{F-1},label");
  for (std::size_t f = 0; f + 1 < header.size(); ++f)
    if (header[f] != "f" + std::to_string(f))
      throw DatasetFormatError("dataset csv: unexpected header column '" + header[f] + "'");

  Dataset ds;
  ds.num_features = header.size() - 1;
  std::size_t lineno = 1;
  std::uint32_t max_label = 0;
  while (std::getline(is, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size())
      throw DatasetFormatError("dataset csv line " + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(cells.size()));
    for (std::size_t f = 0; f < ds.num_features; ++f) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cells[f], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != cells[f].size() || !std::isfinite(v))
        throw DatasetFormatError("dataset csv line " + std::to_string(lineno) +
                                 ": bad feature value '" + cells[f] + "'");
      ds.features.push_back(v);
    }
    const std::string& lab = cells.back();
    if (lab.empty() || lab.find_first_not_of("0123456789") != std::string::npos)
      throw DatasetFormatError("dataset csv line " + std::to_string(lineno) + ": bad label '" +
                               lab + "'");
    const auto y = static_cast<std::uint32_t>(std::stoul(lab));
    ds.labels.push_back(y);
    max_label = std::max(max_label, y);
  }
  if (ds.labels.empty()) throw DatasetFormatError("dataset csv: no samples");
  ds.num_classes = num_classes.value_or(std::max<std::size_t>(2, std::size_t{max_label} + 1));
  if (max_label >= ds.num_classes)
    throw DatasetFormatError("dataset csv: label exceeds num_classes");
  return ds;
}

}  // namespace tcs
