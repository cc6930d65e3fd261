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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Criteria 6 and 8 share the convergence runs.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "tcs/tcs.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void report(int n, const std::string& title, const Outcome& o, double seconds, double limit) {
  const bool in_time = limit <= 0 || seconds < limit;
  const bool ok = o.pass && in_time;
  if (!ok) ++g_failures;
  std::printf("%s criterion %d: %s [%s; %.2fs%s]\n", ok ? "PASS" : "FAIL", n, title.c_str(),
              o.detail.c_str(), seconds, in_time ? "" : " over time limit");
  std::fflush(stdout);
}

Outcome timed(int n, const std::string& title, double limit, const std::function<Outcome()>& fn) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  report(n, title, o, std::chrono::duration<double>(Clock::now() - t0).count(), limit);
  return o;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

bool same_bits(const tcs::ParamVector& a, const tcs::ParamVector& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!same_bits(a.values()[i], b.values()[i])) return false;
  return true;
}

// -----------------------------------------------------------------------------
// 1. budget table, through the CLI

std::string run_cli(const std::string& args) {
  std::string out;
  FILE* p = popen((std::string(TCS_CLI_PATH) + " " + args + " 2>&1").c_str(), "r");
  if (!p) return out;
  std::array<char, 1024> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  pclose(p);
  return out;
}

Outcome criterion_budget() {
  struct Row {
    const char* name;
    const char* args;
    double target, tol;
  };
  const Row rows[] = {
      {"TCS", "--scheme tcs --q 32 --H 1", 0.363, 0.002},
      {"TCS-L2", "--scheme tcs --q 32 --H 2", 0.1815, 0.001},
      {"TCS-L4", "--scheme tcs --q 32 --H 4", 0.0907, 0.0005},
      {"TCS-L4-Q5", "--scheme tcs --q 5 --H 4", 0.01675, 0.0002},
      {"TCS-LF-Q5", "--scheme tcs --q 5 --H 1", 0.067, 0.001},
      {"top-K", "--scheme topk --q 32 --H 1", 0.41, 0.005},
  };
  Outcome o;
  for (const auto& r : rows) {
    const std::string out = run_cli(std::string("budget --phi-global 0.01 --phi-local 0.001 ") + r.args);
    double v = NAN;
    if (std::sscanf(out.c_str(), "analytic %lf", &v) != 1) return {false, std::string(r.name) + ": " + out};
    const bool ok = std::fabs(v - r.target) <= r.tol;
    o.pass = o.pass && ok;
    o.detail += fmt("%s%s %.5f", o.detail.empty() ? "" : ", ", r.name, v);
    if (!ok) o.detail += fmt(" (want %g +- %g)", r.target, r.tol);
  }
  return o;
}

// -----------------------------------------------------------------------------
// 2. worked position-code example

Outcome criterion_worked_example() {
  const std::vector<std::uint32_t> positions{0, 2, 9};  // 1-indexed {1, 3, 10}
  auto bits = tcs::encode_positions(positions, 12, 4);
  const std::string want = "1" "00" "1" "10" "0" "0" "1" "01" "0";
  auto back = tcs::decode_positions(bits);
  const bool ok = bits.to_string() == want && back == positions;
  return {ok, "bits " + bits.to_string() + (back == positions ? ", decodes to {1,3,10}" : ", decode differs")};
}

// -----------------------------------------------------------------------------
// 3. codec round trip and fuzzing

Outcome criterion_codec_property() {
  std::mt19937_64 gen(0x5eed'0003);
  std::uniform_int_distribution<std::size_t> dim(1, std::size_t{1} << 16);
  std::uniform_real_distribution<double> log_phi(std::log(1e-3), std::log(0.25));
  std::size_t round_trip_fail = 0, length_fail = 0, fuzz_rejected = 0, fuzz_accepted = 0,
              fuzz_bad = 0, total_bits = 0;
  std::string first_problem;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t d = dim(gen);
    const double phi = std::exp(log_phi(gen));
    const std::size_t K = std::min(d, tcs::count_from_ratio(phi, d));
    const std::size_t bs = tcs::block_size_for_ratio(phi);
    std::vector<std::uint32_t> all(d), pos;
    std::iota(all.begin(), all.end(), 0u);
    std::sample(all.begin(), all.end(), std::back_inserter(pos), K, gen);  // keeps order

    auto bits = tcs::encode_positions(pos, d, bs);
    total_bits += bits.bit_length;
    const std::size_t w = std::bit_width(bs - 1);  // ceil(log2 bs), independent of the codec
    if (bits.bit_length != K * (w + 1) + (d + bs - 1) / bs) ++length_fail;
    if (tcs::decode_positions(bits) != pos) ++round_trip_fail;

    // corrupt: flip bits, truncate or extend
    auto bad = bits;
    switch (gen() % 3) {
      case 0:
        for (int f = 1 + gen() % 4; f > 0 && bad.bit_length > 0; --f) {
          const std::size_t b = gen() % bad.bit_length;
          bad.bytes[b / 8] ^= std::uint8_t(0x80u >> (b % 8));
        }
        break;
      case 1: bad.bit_length -= std::min<std::size_t>(bad.bit_length, 1 + gen() % 16); break;
      default: {
        const std::size_t extra = 1 + gen() % 16;
        bad.bytes.resize((bad.bit_length + extra + 7) / 8 + 1, 0);
        for (std::size_t b = bad.bit_length; b < bad.bit_length + extra; ++b)
          if (gen() & 1) bad.bytes[b / 8] |= std::uint8_t(0x80u >> (b % 8));
        bad.bit_length += extra;
      }
    }
    try {
      auto got = tcs::decode_positions(bad);
      ++fuzz_accepted;
      for (std::size_t k = 0; k < got.size(); ++k)
        if (got[k] >= d || (k > 0 && got[k] <= got[k - 1])) {
          ++fuzz_bad;
          if (first_problem.empty()) first_problem = fmt("out-of-range index at trial %d", trial);
          break;
        }
    } catch (const tcs::MalformedPayload&) {
      ++fuzz_rejected;
    } catch (const std::exception& e) {
      ++fuzz_bad;
      if (first_problem.empty()) first_problem = e.what();
    }
  }
  const bool ok = round_trip_fail == 0 && length_fail == 0 && fuzz_bad == 0;
  std::string detail = fmt("10000 sets, %zu bits; round-trip failures %zu, length mismatches %zu; "
                           "fuzz rejected %zu, accepted in-range %zu, bad %zu",
                           total_bits, round_trip_fail, length_fail, fuzz_rejected,
                           fuzz_accepted - fuzz_bad, fuzz_bad);
  if (!first_problem.empty()) detail += "; " + first_problem;
  return {ok, detail};
}

// -----------------------------------------------------------------------------
// 4. fractional quantizer error bound

Outcome criterion_quantizer_bound() {
  std::mt19937_64 gen(0x5eed'0004);
  std::uniform_int_distribution<int> len(1, 32);
  std::uniform_real_distribution<double> log_mag(-8.0, 8.0);
  const std::uint32_t Ps[] = {1, 2, 4, 16};
  std::size_t violations = 0, sign_mismatch = 0, checked = 0;
  double worst_ratio = 0.0;  // max |Q(u)-u| / (gamma |u|)
  for (int trial = 0; trial < 100000; ++trial) {
    std::vector<double> u(len(gen));
    for (auto& x : u) x = ((gen() & 1) ? -1.0 : 1.0) * std::exp(log_mag(gen));
    double lo = INFINITY, hi = 0.0;
    for (double x : u) lo = std::min(lo, std::fabs(x)), hi = std::max(hi, std::fabs(x));
    for (std::uint32_t P : Ps) {
      const auto q = tcs::fractional_quantize(u, P).dequantize();
      const double sigma = std::pow(lo / hi, 1.0 / P);
      const double gamma = (1.0 - sigma) / sigma;
      for (std::size_t i = 0; i < u.size(); ++i, ++checked) {
        const double err = std::fabs(q[i] - u[i]);
        if (err > gamma * std::fabs(u[i])) ++violations;
        if (gamma > 0) worst_ratio = std::max(worst_ratio, err / (gamma * std::fabs(u[i])));
      }
      if (P == 1 && q != tcs::scaled_sign_quantize(u)) ++sign_mismatch;
    }
  }
  return {violations == 0 && sign_mismatch == 0,
          fmt("%zu values checked, bound violations %zu, worst err/(gamma|u|) %.4f, "
              "P=1 vs scaled-sign mismatches %zu",
              checked, violations, worst_ratio, sign_mismatch)};
}

// -----------------------------------------------------------------------------
// 5. error-feedback conservation

Outcome criterion_error_feedback() {
  std::mt19937_64 gen(0x5eed'0005);
  std::normal_distribution<double> nd;
  std::size_t conservation_fail = 0, overlap_fail = 0, hamming_fail = 0, tcs_steps = 0;
  for (int step = 0; step < 1000; ++step) {
    std::vector<std::size_t> sizes(1 + gen() % 4);
    for (auto& s : sizes) s = 1 + gen() % 300;
    auto layout = tcs::LayerLayout::make(sizes);
    const std::size_t d = layout->dim();
    std::vector<double> u(d), r(d);
    for (auto& x : u) x = nd(gen);
    if (step % 5 != 0)
      for (auto& x : r) x = 0.1 * nd(gen);
    tcs::ParamVector update(layout, u);
    tcs::ErrorState err{tcs::ParamVector(layout, r)};

    const double phi_g = 0.02 + 0.48 * std::uniform_real_distribution<double>()(gen);
    tcs::CompressResult res;
    std::size_t k_local = 0;
    std::optional<tcs::Mask> global;
    if (step % 2 == 0) {
      res = tcs::topk_compress(update, tcs::CompressorConfig{tcs::Scheme::topk, phi_g}.k_global(d), err);
    } else {
      ++tcs_steps;
      tcs::CompressorConfig cfg{tcs::Scheme::tcs, phi_g, phi_g * (gen() % 100) / 100.0};
      std::vector<double> prev(d);
      for (auto& x : prev) x = nd(gen);
      global = tcs::s_top(tcs::ParamVector(layout, prev), cfg.k_global(d));
      k_local = cfg.k_local(d);
      res = tcs::tcs_compress(update, *global, cfg, err);
    }

    const auto sent = res.sent.to_dense();
    const auto& after = res.error.residual;
    for (std::size_t i = 0; i < d; ++i)
      if (!same_bits(sent.values()[i] + after.values()[i], u[i] + r[i])) {
        ++conservation_fail;
        break;
      }
    const auto support = res.sent.support();
    bool overlap = !tcs::masks_disjoint(res.sent.global, res.sent.local);
    for (auto i : support.indices()) overlap = overlap || after.values()[i] != 0.0;
    if (overlap) ++overlap_fail;
    if (global && tcs::hamming_distance(support, *global) != k_local) ++hamming_fail;
  }
  return {conservation_fail == 0 && overlap_fail == 0 && hamming_fail == 0,
          fmt("1000 steps (%zu tcs, %zu topk); conservation failures %zu, overlapping supports %zu, "
              "hamming mismatches %zu",
              tcs_steps, 1000 - tcs_steps, conservation_fail, overlap_fail, hamming_fail)};
}

// -----------------------------------------------------------------------------
// 6 and 8. convergence runs with mask invariants

const char* kConvergenceConfig = R"(
clients = 10
local_steps = 1
epochs = 100
batch_size = 32
scheme = none
lr_reference = 0.02
lr_reference_batch = 320
warmup_epochs = 5
milestones = 50:0.1, 75:0.1
weight_decay = 0.001
seed = 2026
model = mlp
hidden = 16
classes = 4
features = 20
train_samples = 3200
test_samples = 800
cluster_spread = 4.0
)";

struct InvariantStats {
  std::size_t client_rounds = 0, hamming_fail = 0;
  std::size_t rounds = 0, support_fail = 0, max_support = 0, bound = 0;
  std::set<std::size_t> compressed_rounds;
};

struct ConvergenceRun {
  std::string name;
  double accuracy = 0.0;
  double seconds = 0.0;
  double bits_per_param = 0.0;
};

ConvergenceRun converge(const std::string& name, const std::vector<std::string>& overrides,
                        InvariantStats* inv) {
  auto cfg = tcs::parse_config(kConvergenceConfig, overrides);
  tcs::RunOptions opt;
  if (inv) {
    const std::size_t d = cfg.data.model.make_layout()->dim();
    const std::size_t kg = cfg.compressor.k_global(d), kl = cfg.compressor.k_local(d);
    inv->bound = kg + cfg.clients * kl;
    opt.on_client = [inv, kl](const tcs::ClientTrace& t) {
      if (!t.compressed || !t.global_mask) return;
      ++inv->client_rounds;
      inv->compressed_rounds.insert(t.round);
      if (tcs::hamming_distance(t.sent.support(), *t.global_mask) != kl) ++inv->hamming_fail;
    };
    opt.on_round = [inv](const tcs::RoundTrace& t) {
      if (!t.compressed) return;
      ++inv->rounds;
      const std::size_t s = tcs::support_size(t.broadcast);
      inv->max_support = std::max(inv->max_support, s);
      if (s > inv->bound) ++inv->support_fail;
    };
  }
  const auto t0 = Clock::now();
  auto res = tcs::run_experiment(cfg, opt);
  ConvergenceRun r{name, res.log.back().test_accuracy,
                   std::chrono::duration<double>(Clock::now() - t0).count(),
                   res.log.back().uplink_bits_per_param_per_iter};
  std::printf("  run %-14s test accuracy %.4f  bits/param/iter %8.4f  %.2fs\n", name.c_str(),
              r.accuracy, r.bits_per_param, r.seconds);
  return r;
}

// -----------------------------------------------------------------------------
// 7. dense limit

Outcome criterion_dense_limit() {
  const char* base = R"(
clients = 4
epochs = 20
batch_size = 16
scheme = tcs
phi_global = 1
phi_local = 0
lr_reference = 0.1
lr_reference_batch = 64
warmup_epochs = 2
milestones = 10:0.5
weight_decay = 0.0001
seed = 77
model = mlp
hidden = 12
classes = 3
features = 8
train_samples = 800
test_samples = 200
cluster_spread = 1.5
)";
  Outcome o{true, ""};
  for (const char* H : {"1", "4"}) {
    auto cfg = tcs::parse_config(base, {std::string("local_steps=") + H});
    auto tcs_run = tcs::run_tcs(cfg);
    auto dense = tcs::run_fedavg(cfg);
    const bool same = same_bits(tcs_run.final_params, dense.final_params);
    o.pass = o.pass && same;
    o.detail += fmt("%sH=%s %s (%zu rounds)", o.detail.empty() ? "" : ", ", H,
                    same ? "bit-identical" : "DIFFERS", tcs_run.log.size());
  }
  return o;
}

// -----------------------------------------------------------------------------
// 9. gradients against central differences

Outcome criterion_gradients() {
  std::mt19937_64 gen(0x5eed'0009);
  double worst = 0.0;
  std::size_t fails = 0;
  std::string detail;
  for (auto kind : {tcs::ModelKind::logreg, tcs::ModelKind::mlp}) {
    tcs::ModelSpec spec{kind, 7, 4, kind == tcs::ModelKind::mlp ? 10u : 0u};
    auto ds = tcs::synth_dataset(4, 7, 48, 1.0, 123);
    std::vector<std::uint32_t> rows(ds.size());
    std::iota(rows.begin(), rows.end(), 0u);
    tcs::Batch batch{&ds, rows};
    auto model = tcs::Model::create(spec, 5);
    for (double wd : {0.0, 1e-4}) {
      const auto g = tcs::gradient(spec, model.params, batch, wd);
      double kind_worst = 0.0;
      for (int c = 0; c < 100; ++c) {
        const std::size_t i = gen() % model.params.size();
        const double h = 1e-5;
        auto at = [&](double delta) {
          std::vector<double> th = model.params.vec();
          th[i] += delta;
          return tcs::loss(spec, tcs::ParamVector(model.layout, std::move(th)), batch, wd);
        };
        const double fd = (at(h) - at(-h)) / (2 * h);
        const double a = g.values()[i];
        const double rel = std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-6});
        kind_worst = std::max(kind_worst, rel);
        if (rel > 1e-4) ++fails;
      }
      worst = std::max(worst, kind_worst);
      detail += fmt("%s%s wd=%g max rel %.2e", detail.empty() ? "" : ", ", tcs::to_string(kind),
                    wd, kind_worst);
    }
  }
  return {fails == 0, detail + fmt("; %zu coordinates over 1e-4", fails)};
}

// -----------------------------------------------------------------------------
// 10. thread-count determinism

Outcome criterion_determinism() {
  auto cfg = tcs::parse_config(kConvergenceConfig,
                               {"epochs=10", "scheme=tcs", "phi_global=0.1", "phi_local=0.01",
                                "quantizer=fractional", "quantizer_levels=16"});
  auto csv_at = [&](std::size_t threads) {
    tcs::RunOptions opt;
    opt.threads = threads;
    std::ostringstream os;
    tcs::write_metrics_csv(os, tcs::run_experiment(cfg, opt).log);
    return os.str();
  };
  const std::string one = csv_at(1), eight = csv_at(8);
  return {one == eight && !one.empty(),
          fmt("metrics CSV %zu bytes, threads 1 vs 8 %s", one.size(),
              one == eight ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  timed(1, "bit-budget table", 5, criterion_budget);
  timed(2, "worked position-code example", 1, criterion_worked_example);
  timed(3, "position codec round trip and fuzzing", 30, criterion_codec_property);
  timed(4, "fractional quantizer error bound", 30, criterion_quantizer_bound);
  timed(5, "error-feedback conservation", 10, criterion_error_feedback);

  // Shared by 6 and 8.
  InvariantStats inv;
  std::vector<ConvergenceRun> runs;
  const std::string tcs_args[] = {"scheme=tcs", "phi_global=0.1", "phi_local=0.01"};
  std::vector<std::string> tcs_set(std::begin(tcs_args), std::end(tcs_args));
  auto with = [&](std::initializer_list<std::string> extra) {
    auto v = tcs_set;
    v.insert(v.end(), extra);
    return v;
  };
  std::string run_error;
  try {
    runs.push_back(converge("dense", {}, nullptr));
    runs.push_back(converge("tcs", tcs_set, &inv));
    runs.push_back(converge("tcs+q5", with({"quantizer=fractional", "quantizer_levels=16"}), &inv));
    runs.push_back(converge("tcs+momentum", with({"momentum=0.9"}), &inv));
  } catch (const std::exception& e) {
    run_error = e.what();
  }

  report(6, "mask-correlation invariant",
         run_error.empty()
             ? Outcome{inv.hamming_fail == 0 && inv.support_fail == 0 && inv.client_rounds > 0 &&
                           inv.compressed_rounds.size() >= 50,
                       fmt("%zu client-rounds over %zu compressed rounds, hamming mismatches %zu; "
                           "max downlink support %zu <= %zu, violations %zu",
                           inv.client_rounds, inv.rounds, inv.hamming_fail, inv.max_support,
                           inv.bound, inv.support_fail)}
             : Outcome{false, run_error},
         0, 0);

  timed(7, "dense-limit oracle", 60, criterion_dense_limit);

  {
    Outcome o{false, run_error};
    double slowest = 0.0;
    if (runs.size() == 4) {
      const double A = runs[0].accuracy * 100, T = runs[1].accuracy * 100,
                   Q = runs[2].accuracy * 100, M = runs[3].accuracy * 100;
      for (const auto& r : runs) slowest = std::max(slowest, r.seconds);
      o.pass = T >= A - 2 && Q >= A - 3 && M >= T - 1 && slowest < 120;
      o.detail = fmt("A=%.2f; tcs %.2f (need >= %.2f); tcs+q5 %.2f (need >= %.2f); "
                     "momentum %.2f (need >= %.2f); slowest run %.1fs",
                     A, T, A - 2, Q, A - 3, M, T - 1, slowest);
    }
    report(8, "desk-scale convergence", o, slowest, 0);
  }

  timed(9, "gradient correctness", 10, criterion_gradients);
  timed(10, "thread-count determinism", 60, criterion_determinism);

  std::printf("%d of 10 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
