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

// Federated training loops over N simulated clients and one parameter
// server:
//
//   run_fedavg        dense model-difference averaging, H local steps
//   run_tcs           sparsified uplink with per-client error feedback
//                     (time-correlated, top-K or rand-K masks)
//   run_tcs_momentum  FedSGD (H = 1) with a momentum term every client
//                     maintains identically from the broadcast aggregate
//
// Clients of a round may run on several threads. Everything a client reads
// is immutable for the round, each client owns its residual, and the server
// folds client updates in ascending client order, so results do not depend on
// the thread count.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <numeric>
#include <span>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "tcs/codec.hpp"
#include "tcs/compressors.hpp"
#include "tcs/models.hpp"
#include "tcs/tensor.hpp"

namespace tcs {

/// Training produced a non-finite loss or parameter.
class Diverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Milestone {
  double epoch;
  double factor;
};

struct DataConfig {
  ModelSpec model;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
  double cluster_spread = 1.0;
  std::string train_csv;  // when set, replaces the synthetic training set
  std::string test_csv;
};

struct ExperimentConfig {
  std::size_t clients = 1;
  std::size_t local_steps = 1;
  std::size_t epochs = 1;
  std::size_t batch_size = 64;
  CompressorConfig compressor{Scheme::none};
  QuantizerSpec quantizer = QuantizerSpec::none();
  double lr_reference = 0.1;
  std::size_t lr_reference_batch = 128;
  double warmup_epochs = 0.0;
  std::vector<Milestone> milestones;
  double weight_decay = 0.0;
  double momentum = 0.0;
  std::uint64_t seed = 0;
  DataConfig data;
};

struct ConfigError {
  std::string field;
  std::string message;
};

inline std::optional<ConfigError> validate(const ExperimentConfig& c) {
  auto bad = [](std::string f, std::string m) { return ConfigError{std::move(f), std::move(m)}; };
  if (c.clients < 1) return bad("clients", "must be >= 1");
  if (c.local_steps < 1) return bad("local_steps", "must be >= 1");
  if (c.epochs < 1) return bad("epochs", "must be >= 1");
  if (c.batch_size < 1) return bad("batch_size", "must be >= 1");
  if (!(c.lr_reference >= 0.0)) return bad("lr_reference", "must be >= 0");
  if (c.lr_reference_batch < 1) return bad("lr_reference_batch", "must be >= 1");
  if (!(c.warmup_epochs >= 0.0)) return bad("warmup_epochs", "must be >= 0");
  for (std::size_t k = 0; k < c.milestones.size(); ++k) {
    if (!(c.milestones[k].epoch > 0.0) || !(c.milestones[k].factor > 0.0))
      return bad("milestones", "epochs and factors must be positive");
    if (k > 0 && !(c.milestones[k - 1].epoch < c.milestones[k].epoch))
      return bad("milestones", "epochs must be strictly increasing");
  }
  if (!(c.weight_decay >= 0.0)) return bad("weight_decay", "must be >= 0");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) return bad("momentum", "must be in [0, 1)");
  if (c.momentum > 0.0 && c.local_steps != 1)
    return bad("local_steps", "momentum runs require local_steps = 1");
  if (auto msg = c.compressor.validate(); !msg.empty()) {
    auto colon = msg.find(':');
    return bad(msg.substr(0, colon), msg.substr(colon + 2));
  }
  if (c.quantizer.kind == QuantizerKind::fractional && (c.quantizer.P < 1 || c.quantizer.P > 65535))
    return bad("quantizer_levels", "must be in [1, 65535]");
  const auto& d = c.data;
  if (d.model.features < 1) return bad("features", "must be >= 1");
  if (d.model.classes < 2) return bad("classes", "must be >= 2");
  if (d.model.kind == ModelKind::mlp && d.model.hidden < 1) return bad("hidden", "must be >= 1");
  if (d.train_csv.empty()) {
    if (d.train_samples < c.clients) return bad("train_samples", "must be >= clients");
    if (d.train_samples < d.model.classes) return bad("train_samples", "must be >= classes");
    if (!(d.cluster_spread >= 0.0)) return bad("cluster_spread", "must be >= 0");
  }
  if (c.compressor.fairness != Fairness::none) {
    const auto layout = d.model.make_layout();
    const std::size_t dim = layout->dim();
    auto sum = [](const std::vector<std::size_t>& v) {
      std::size_t s = 0;
      for (auto x : v) s += x;
      return s;
    };
    if (sum(layer_floors(*layout, c.compressor.phi_min_global)) > c.compressor.k_global(dim))
      return bad("phi_min_global", "layer floors exceed K_global");
    if (c.compressor.fairness == Fairness::lf &&
        sum(layer_floors(*layout, c.compressor.phi_min_local)) > c.compressor.k_local(dim))
      return bad("phi_min_local", "layer floors exceed K_local");
  }
  return std::nullopt;
}

/// Learning rate at a (fractional) epoch. The reference rate is scaled by
/// the total batch N*B relative to the reference batch, reached by a linear
/// ramp over the warmup epochs and then multiplied by every milestone factor
/// already passed.
inline double lr_schedule(double epoch, const ExperimentConfig& c) {
  const double scaled = c.lr_reference * static_cast<double>(c.clients * c.batch_size) /
                        static_cast<double>(c.lr_reference_batch);
  double lr = scaled;
  if (epoch < c.warmup_epochs)
    lr = c.lr_reference + (scaled - c.lr_reference) * (epoch / c.warmup_epochs);
  for (const auto& m : c.milestones)
    if (epoch >= m.epoch) lr *= m.factor;
  return lr;
}

// -----------------------------------------------------------------------------
// Data

struct FederatedData {
  Dataset train;
  Dataset test;
  std::vector<Dataset> shards;
};

inline FederatedData prepare_data(const ExperimentConfig& c) {
  FederatedData fd;
  const auto& dc = c.data;
  if (!dc.train_csv.empty()) {
    std::ifstream tr(dc.train_csv);
    if (!tr) throw DatasetFormatError("cannot open " + dc.train_csv);
    fd.train = read_dataset_csv(tr, dc.model.classes);
    if (!dc.test_csv.empty()) {
      std::ifstream te(dc.test_csv);
      if (!te) throw DatasetFormatError("cannot open " + dc.test_csv);
      fd.test = read_dataset_csv(te, dc.model.classes);
    }
    if (fd.train.num_features != dc.model.features)
      throw DatasetFormatError("dataset feature count does not match config 'features'");
  } else {
    Dataset all = synth_dataset(dc.model.classes, dc.model.features,
                                dc.train_samples + dc.test_samples, dc.cluster_spread, c.seed);
    if (dc.test_samples > 0) {
      auto [tr, te] = split_tail(all, dc.test_samples);
      fd.train = std::move(tr);
      fd.test = std::move(te);
    } else {
      fd.train = std::move(all);
    }
  }
  require(fd.train.size() >= c.clients, "prepare_data: fewer samples than clients");
  fd.shards = partition_iid(fd.train, c.clients, c.seed);
  return fd;
}

/// Full passes are counted on the smallest shard with incomplete final
/// batches dropped, so every client sees the same number of steps per epoch.
inline std::size_t steps_per_epoch(const std::vector<Dataset>& shards, std::size_t batch) {
  std::size_t smallest = shards.front().size();
  for (const auto& s : shards) smallest = std::min(smallest, s.size());
  return std::max<std::size_t>(1, smallest / batch);
}

inline std::size_t total_rounds(const ExperimentConfig& c, std::size_t spe) {
  return (c.epochs * spe + c.local_steps - 1) / c.local_steps;
}

/// Mini-batches drawn without replacement within an epoch; the shuffle of
/// epoch e for client n comes from stream (seed, "batch", n, e).
class BatchSampler {
 public:
  BatchSampler(std::size_t shard_size, std::size_t batch, std::size_t spe, std::uint64_t seed,
               std::size_t client)
      : shard_size_(shard_size), batch_(std::min(batch, shard_size)), spe_(spe), seed_(seed),
        client_(client) {
    require(shard_size >= 1, "BatchSampler: empty shard");
  }

  /// Row ids of global step s for this client.
  std::span<const std::uint32_t> rows(std::size_t step) {
    const std::size_t epoch = step / spe_;
    if (!cached_epoch_ || *cached_epoch_ != epoch) {
      perm_.resize(shard_size_);
      std::iota(perm_.begin(), perm_.end(), 0u);
      RngStream rng = substream(seed_, "batch", client_, epoch);
      rng.shuffle(perm_);
      cached_epoch_ = epoch;
    }
    const std::size_t j = step % spe_;
    const std::size_t begin = (j * batch_) % shard_size_;
    const std::size_t len = std::min(batch_, shard_size_ - begin);
    return std::span<const std::uint32_t>(perm_).subspan(begin, len);
  }

 private:
  std::size_t shard_size_, batch_, spe_;
  std::uint64_t seed_;
  std::size_t client_;
  std::vector<std::uint32_t> perm_;
  std::optional<std::size_t> cached_epoch_;
};

struct LocalUpdate {
  ParamVector delta;  // sum over local steps of -lr * g
  double mean_loss;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  if (!all_finite(v)) throw Diverged(std::string("diverged: non-finite ") + what);
}

}  // namespace detail

/// H local SGD steps starting from theta; theta itself is left untouched.
inline LocalUpdate client_local_update(const ModelSpec& spec, const ParamVector& theta,
                                       const Dataset& shard, std::size_t H, double lr,
                                       double weight_decay, BatchSampler& sampler,
                                       std::size_t first_step) {
  require(H >= 1, "client_local_update: H must be >= 1");
  require(shard.size() >= 1, "client_local_update: empty shard");
  std::vector<double> th(theta.vec());
  std::vector<double> delta(theta.size(), 0.0);
  std::vector<double> g;
  double loss_sum = 0.0;
  for (std::size_t tau = 0; tau < H; ++tau) {
    Batch b{&shard, sampler.rows(first_step + tau)};
    const double l = loss_and_gradient_raw(spec, th, b, weight_decay, g);
    if (!std::isfinite(l)) throw Diverged("diverged: non-finite loss");
    loss_sum += l;
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double step = -lr * g[i];
      delta[i] += step;
      th[i] += step;
    }
    detail::require_finite(th, "parameters");
  }
  detail::require_finite(delta, "update");
  return {ParamVector(theta.layout(), std::move(delta)), loss_sum / static_cast<double>(H)};
}

/// Elementwise mean, summed in ascending client order.
inline ParamVector aggregate(std::span<const ParamVector> updates) {
  require(!updates.empty(), "aggregate: need at least one update");
  const auto& layout = updates.front().layout();
  std::vector<double> sum(updates.front().size(), 0.0);
  for (const auto& u : updates) {
    require_same_layout(layout, u.layout(), "aggregate");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += u[i];
  }
  const double n = static_cast<double>(updates.size());
  for (double& v : sum) v /= n;
  return ParamVector(layout, std::move(sum));
}

inline ParamVector aggregate(std::span<const SparseUpdate> updates) {
  std::vector<ParamVector> dense;
  dense.reserve(updates.size());
  for (const auto& u : updates) dense.push_back(u.to_dense());
  return aggregate(std::span<const ParamVector>(dense));
}

// -----------------------------------------------------------------------------
// Metrics

struct MetricsRecord {
  std::size_t round = 0;
  double epoch = 0.0;
  double lr = 0.0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::uint64_t uplink_bits_total = 0;
  double uplink_bits_per_param_per_iter = 0.0;
  std::size_t downlink_support_size = 0;
  double wall_ms = 0.0;
};

using MetricsLog = std::vector<MetricsRecord>;

inline void write_metrics_csv(std::ostream& os, const MetricsLog& log) {
  os << "round,epoch,lr,train_loss,test_accuracy,uplink_bits_total,"
        "uplink_bits_per_param_per_iter,downlink_support_size,wall_ms\n";
  for (const auto& r : log) {
    os << r.round << ',' << format_real(r.epoch) << ',' << format_real(r.lr) << ','
       << format_real(r.train_loss) << ',' << format_real(r.test_accuracy) << ','
       << r.uplink_bits_total << ',' << format_real(r.uplink_bits_per_param_per_iter) << ','
       << r.downlink_support_size << ',' << format_real(r.wall_ms) << '\n';
  }
}

// -----------------------------------------------------------------------------
// Observation hooks (tests and diagnostics)

/// What one client did in one round. Delivered after the round's clients have
/// finished, in client order, on the calling thread.
struct ClientTrace {
  std::size_t round;
  std::size_t client;
  bool compressed;
  const ParamVector& theta;             // model before local computation
  const ParamVector& update;            // model difference (or gradient)
  const ParamVector& residual_before;
  const ParamVector& residual_after;
  const SparseUpdate& sent;             // values as aggregated by the server
  const SparseUpdate& sent_exact;       // pre-quantization values
  const std::optional<Mask>& global_mask;
  const ParamVector* momentum;          // momentum runs only
  std::size_t payload_bits;
};

struct RoundTrace {
  std::size_t round;
  bool compressed;
  const ParamVector& broadcast;         // aggregate sent to all clients
  std::size_t k_global;
  std::size_t k_local;
};

struct RunOptions {
  std::size_t threads = 0;  // 0: TCS_THREADS or hardware concurrency
  bool record_wall_clock = false;
  std::function<void(const ClientTrace&)> on_client;
  std::function<void(const RoundTrace&)> on_round;
};

struct RunResult {
  MetricsLog log;
  ParamVector final_params;
};

inline std::size_t default_threads() {
  if (const char* env = std::getenv("TCS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

/// Runs fn(i) for i in [0, n) on up to `threads` threads, static striping.
/// The first exception (lowest i) is rethrown on the caller.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < n; i += stride) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

enum class Loop { fedavg, error_feedback, momentum };

struct ClientState {
  ParamVector theta;
  ErrorState error;
  ParamVector momentum;
  BatchSampler sampler;
  std::size_t step = 0;
};

struct ClientOutcome {
  ParamVector theta_before;
  ParamVector update;
  ParamVector residual_before;
  SparseUpdate sent;
  SparseUpdate sent_exact;
  std::optional<Mask> global_mask;
  std::size_t payload_bits = 0;
  double loss = 0.0;
};

/// Folds the quantization error of the sent values back into the residual.
inline ParamVector add_quantization_error(const ParamVector& residual, const SparseUpdate& exact,
                                          const SparseUpdate& deq) {
  std::vector<double> r(residual.vec());
  for (std::size_t k = 0; k < exact.global_values.size(); ++k)
    r[exact.global.indices()[k]] += exact.global_values[k] - deq.global_values[k];
  for (std::size_t k = 0; k < exact.local_values.size(); ++k)
    r[exact.local.indices()[k]] += exact.local_values[k] - deq.local_values[k];
  return ParamVector(residual.layout(), std::move(r));
}

inline RunResult simulate(const ExperimentConfig& cfg, Loop loop, const RunOptions& opt) {
  if (auto err = validate(cfg)) throw ContractViolation("config field '" + err->field + "': " + err->message);
  if (loop == Loop::momentum) require(cfg.local_steps == 1, "run_tcs_momentum: H must be 1");

  const FederatedData data = prepare_data(cfg);
  const ModelSpec& spec = cfg.data.model;
  const Model init = Model::create(spec, cfg.seed);
  const LayoutPtr layout = init.layout;
  const std::size_t d = layout->dim();
  const std::size_t N = cfg.clients;
  const std::size_t H = cfg.local_steps;
  const std::size_t spe = steps_per_epoch(data.shards, cfg.batch_size);
  const std::size_t rounds = total_rounds(cfg, spe);
  const std::size_t threads = opt.threads ? opt.threads : default_threads();

  const Scheme scheme = loop == Loop::fedavg ? Scheme::none : cfg.compressor.scheme;
  const std::size_t k_global = scheme == Scheme::none ? d : cfg.compressor.k_global(d);
  const std::size_t k_local = scheme == Scheme::tcs ? cfg.compressor.k_local(d) : 0;
  require(k_local <= d - std::min(k_global, d), "simulate: K_local > d - K_global");
  const double phi_local_wire = scheme == Scheme::topk ? cfg.compressor.phi_global : cfg.compressor.phi_local;

  std::vector<ClientState> clients;
  clients.reserve(N);
  for (std::size_t n = 0; n < N; ++n)
    clients.push_back({init.params, ErrorState::zeros(layout), ParamVector::zeros(layout),
                       BatchSampler(data.shards[n].size(), cfg.batch_size, spe, cfg.seed, n), 0});

  ParamVector broadcast = ParamVector::zeros(layout);  // last aggregate (delta or gradient)
  double broadcast_lr = 0.0;                           // rate of the round that produced it
  RunResult result{{}, init.params};
  result.log.reserve(rounds);

  for (std::size_t t = 0; t < rounds; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    const double epoch = static_cast<double>(t * H) / static_cast<double>(spe);
    const double lr = lr_schedule(epoch, cfg);
    const bool compressed = scheme != Scheme::none && epoch >= cfg.warmup_epochs;

    std::vector<ClientOutcome> out(N);
    parallel_for(N, threads, [&](std::size_t n) {
      ClientState& cs = clients[n];
      ClientOutcome& o = out[n];

      // Global mask: a pure function of the broadcast every client received.
      if (compressed && scheme == Scheme::tcs)
        o.global_mask = tcs_global_mask(broadcast, k_global, cfg.compressor.fairness,
                                        cfg.compressor.phi_min_global);
      else if (compressed && scheme == Scheme::randk)
        o.global_mask = randk_mask(layout, k_global, t, cfg.seed);

      if (loop == Loop::momentum) {
        std::vector<double> w(d), th(cs.theta.vec());
        for (std::size_t i = 0; i < d; ++i) {
          w[i] = cfg.momentum * cs.momentum[i] + broadcast[i];
          th[i] -= broadcast_lr * w[i];
        }
        require_finite(th, "parameters");
        cs.momentum = ParamVector(layout, std::move(w));
        cs.theta = ParamVector(layout, std::move(th));
      } else if (t > 0) {
        std::vector<double> th(cs.theta.vec());
        for (std::size_t i = 0; i < d; ++i) th[i] += broadcast[i];
        require_finite(th, "parameters");
        cs.theta = ParamVector(layout, std::move(th));
      }
      o.theta_before = cs.theta;

      if (loop == Loop::momentum) {
        Batch b{&data.shards[n], cs.sampler.rows(cs.step)};
        std::vector<double> g;
        o.loss = loss_and_gradient_raw(spec, cs.theta.values(), b, cfg.weight_decay, g);
        if (!std::isfinite(o.loss)) throw Diverged("diverged: non-finite loss");
        require_finite(g, "gradient");
        o.update = ParamVector(layout, std::move(g));
      } else {
        auto lu = client_local_update(spec, cs.theta, data.shards[n], H, lr, cfg.weight_decay,
                                      cs.sampler, cs.step);
        o.update = std::move(lu.delta);
        o.loss = lu.mean_loss;
      }
      cs.step += H;
      o.residual_before = cs.error.residual;

      if (!compressed) {
        o.sent_exact = SparseUpdate{Mask::full(layout), o.update.vec(), Mask(layout), {}};
        o.sent = o.sent_exact;
        o.payload_bits = encode_payload(o.sent_exact, QuantizerSpec::none(), 1.0,
                                        static_cast<std::uint32_t>(t))
                             .size_bits();
        return;
      }

      CompressResult cr = [&] {
        switch (scheme) {
          case Scheme::tcs: return tcs_compress(o.update, *o.global_mask, cfg.compressor, cs.error);
          case Scheme::topk: return topk_compress(o.update, k_global, cs.error);
          case Scheme::randk: return shared_mask_compress(o.update, *o.global_mask, cs.error);
          case Scheme::none: break;
        }
        throw ContractViolation("simulate: unreachable scheme");
      }();
      o.sent_exact = std::move(cr.sent);
      auto enc = encode_payload_with_values(o.sent_exact, cfg.quantizer, phi_local_wire,
                                            static_cast<std::uint32_t>(t));
      o.payload_bits = enc.payload.size_bits();
      if (cfg.quantizer.kind == QuantizerKind::none) {
        // In-process transport keeps full precision; the payload above is
        // used for accounting.
        o.sent = o.sent_exact;
        cs.error = std::move(cr.error);
      } else {
        o.sent = std::move(enc.dequantized);
        cs.error = ErrorState{add_quantization_error(cr.error.residual, o.sent_exact, o.sent)};
      }
    });

    std::vector<SparseUpdate> sent;
    sent.reserve(N);
    double loss_sum = 0.0;
    std::uint64_t bits = 0;
    for (auto& o : out) {
      sent.push_back(o.sent);
      loss_sum += o.loss;
      bits += o.payload_bits;
    }
    broadcast = aggregate(std::span<const SparseUpdate>(sent));

    if (opt.on_client) {
      for (std::size_t n = 0; n < N; ++n) {
        const auto& o = out[n];
        opt.on_client(ClientTrace{t, n, compressed, o.theta_before, o.update, o.residual_before,
                                  clients[n].error.residual, o.sent, o.sent_exact, o.global_mask,
                                  loop == Loop::momentum ? &clients[n].momentum : nullptr,
                                  o.payload_bits});
      }
    }
    if (opt.on_round)
      opt.on_round(RoundTrace{t, compressed, broadcast, compressed ? k_global : d,
                              compressed ? k_local : 0});

    // Model every client will hold once it applies this broadcast.
    std::vector<double> next(clients.front().theta.vec());
    for (std::size_t i = 0; i < d; ++i) {
      if (loop == Loop::momentum)
        next[i] -= lr * (cfg.momentum * clients.front().momentum[i] + broadcast[i]);
      else
        next[i] += broadcast[i];
    }
    require_finite(next, "parameters");
    result.final_params = ParamVector(layout, std::move(next));

    MetricsRecord rec;
    rec.round = t;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(N);
    if (!std::isfinite(rec.train_loss)) throw Diverged("diverged: non-finite loss");
    rec.test_accuracy = accuracy(spec, result.final_params, data.test);
    rec.uplink_bits_total = bits;
    rec.uplink_bits_per_param_per_iter = measured_bits_per_param(static_cast<double>(bits), d, H, N);
    rec.downlink_support_size = support_size(broadcast);
    if (opt.record_wall_clock)
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(rec);
    broadcast_lr = lr;
  }
  return result;
}

}  // namespace detail

/// Dense federated averaging; compressor and quantizer settings are ignored.
inline RunResult run_fedavg(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  return detail::simulate(cfg, detail::Loop::fedavg, opt);
}

/// Sparsified uplink with error accumulation. Scheme none degenerates to
/// run_fedavg.
inline RunResult run_tcs(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  return detail::simulate(cfg, detail::Loop::error_feedback, opt);
}

/// FedSGD with global momentum; requires local_steps = 1.
inline RunResult run_tcs_momentum(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  require(cfg.local_steps == 1, "run_tcs_momentum: H must be 1");
  return detail::simulate(cfg, detail::Loop::momentum, opt);
}

/// Picks the loop a configuration describes.
inline RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {}) {
  if (cfg.momentum > 0.0) return run_tcs_momentum(cfg, opt);
  if (cfg.compressor.scheme == Scheme::none) return run_fedavg(cfg, opt);
  return run_tcs(cfg, opt);
}

}  // namespace tcs
