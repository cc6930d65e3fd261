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

// tcs: experiment runner and codec debugging tool.
//
//   tcs run --config FILE --out DIR [--seed N] [--set key=value]... [--force]
//   tcs budget [--scheme S --q Q --phi-global G --phi-local L --H H] [--table]
//   tcs encode VALUES PAYLOAD [--phi L] [--quantizer K --levels P] [--global-mask FILE]
//   tcs decode PAYLOAD VALUES [--global-mask FILE]
//
// Exit codes: 0 ok, 1 I/O or usage failure, 2 config error, 3 diverged,
// 4 malformed payload.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "tcs/tcs.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "tcs 0.1.0";

enum Exit { kOk = 0, kFailure = 1, kConfigError = 2, kDiverged = 3, kMalformed = 4 };

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::string s = read_text(path);
  return {s.begin(), s.end()};
}

/// Writes to a sibling temp file and renames it into place, so a failed
/// command never leaves a partial output file.
void write_atomic(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::vector<double> parse_values(const std::string& text, const std::string& path) {
  std::vector<double> v;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    try {
      v.push_back(tcs::detail::FieldReader::parse_real("value", tok));
    } catch (const tcs::ConfigFieldError&) {
      throw IoError(path + ": bad value '" + tok + "'");
    }
  }
  return v;
}

std::vector<std::uint32_t> parse_indices(const std::string& text, const std::string& path) {
  std::vector<std::uint32_t> idx;
  std::istringstream is(text);
  std::string tok;
  while (is >> tok) {
    if (tok.find_first_not_of("0123456789") != std::string::npos)
      throw IoError(path + ": bad index '" + tok + "'");
    idx.push_back(static_cast<std::uint32_t>(std::stoul(tok)));
  }
  return idx;
}

tcs::Mask load_mask(const std::string& path, const tcs::LayoutPtr& layout) {
  if (path.empty()) return tcs::Mask(layout);
  auto idx = parse_indices(read_text(path), path);
  std::sort(idx.begin(), idx.end());
  for (auto i : idx)
    if (i >= layout->dim()) throw IoError(path + ": index " + std::to_string(i) + " >= d");
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return tcs::Mask(layout, std::move(idx));
}

/// Little-endian dump: "TCSM", u32 version 1, u64 d, d float64.
std::string model_dump(const tcs::ParamVector& p) {
  std::string out = "TCSM";
  auto put = [&](std::uint64_t v, int bytes) {
    for (int k = 0; k < bytes; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  };
  put(1, 4);
  put(p.size(), 8);
  for (double x : p.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    put(bits, 8);
  }
  return out;
}

// -----------------------------------------------------------------------------
// run

struct RunArgs {
  std::string config, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  bool force = false;
  bool wall_clock = false;
};

int cmd_run(const RunArgs& a) {
  tcs::ExperimentConfig cfg;
  try {
    auto overrides = a.overrides;
    if (a.seed) overrides.push_back("seed=" + std::to_string(*a.seed));
    cfg = tcs::parse_config(read_text(a.config), overrides);
  } catch (const tcs::ConfigFieldError& e) {
    std::cerr << "tcs run: " << e.what() << '\n';
    return kConfigError;
  }

  const fs::path out(a.out);
  if (fs::exists(out) && !a.force) {
    std::cerr << "tcs run: output directory " << out << " exists (use --force to replace it)\n";
    return kFailure;
  }

  tcs::RunOptions opt;
  opt.record_wall_clock = a.wall_clock;
  tcs::RunResult res;
  try {
    res = tcs::run_experiment(cfg, opt);
  } catch (const tcs::Diverged& e) {
    std::cerr << "tcs run: " << e.what() << '\n';
    return kDiverged;
  } catch (const tcs::DatasetFormatError& e) {
    std::cerr << "tcs run: " << e.what() << '\n';
    return kConfigError;
  }

  std::ostringstream csv;
  tcs::write_metrics_csv(csv, res.log);
  std::ostringstream manifest;
  manifest << "version = " << kVersion << '\n'
           << "config = " << a.config << '\n'
           << "seed = " << cfg.seed << '\n';

  // Stage everything in a sibling directory, then swap it in.
  fs::path parent = out.has_parent_path() ? out.parent_path() : fs::path(".");
  fs::path stage = parent / (out.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(stage);
  fs::create_directories(stage);
  try {
    write_atomic(stage / "metrics.csv", csv.str());
    write_atomic(stage / "model.bin", model_dump(res.final_params));
    write_atomic(stage / "config.resolved", tcs::write_config(cfg));
    write_atomic(stage / "manifest.txt", manifest.str());
    if (fs::exists(out)) fs::remove_all(out);
    fs::rename(stage, out);
  } catch (...) {
    fs::remove_all(stage);
    throw;
  }
  const auto& last = res.log.back();
  std::printf("rounds %zu  final test_accuracy %.4f  train_loss %.6f  bits/param/iter %.6g\n",
              res.log.size(), last.test_accuracy, last.train_loss,
              last.uplink_bits_per_param_per_iter);
  return kOk;
}

// -----------------------------------------------------------------------------
// budget

struct BudgetArgs {
  std::string scheme = "tcs";
  double q = 32, phi_global = 0.01, phi_local = 0.001, H = 1;
  std::size_t d = 0;
  bool table = false;
  bool measured = false;
};

/// Bits per parameter per iteration of one payload over a random sparse
/// update with the configured ratios.
double measured_budget(tcs::Scheme scheme, const tcs::QuantizerSpec& q, double phi_g,
                       double phi_l, double H, std::size_t d) {
  auto layout = tcs::LayerLayout::make({d});
  std::mt19937_64 gen(1);
  std::vector<double> v(d);
  std::normal_distribution<double> nd;
  for (auto& x : v) x = nd(gen);
  tcs::ParamVector u(layout, v);
  tcs::SparseUpdate su;
  const std::size_t kg = tcs::count_from_ratio(phi_g, d);
  if (scheme == tcs::Scheme::tcs) {
    auto g = tcs::s_top(tcs::ParamVector(layout, std::vector<double>(d, 0.0)), kg);
    tcs::CompressorConfig c{scheme, phi_g, phi_l};
    su = tcs::tcs_compress(u, g, c, tcs::ErrorState::zeros(layout)).sent;
  } else if (scheme == tcs::Scheme::topk) {
    su = tcs::topk_compress(u, kg, tcs::ErrorState::zeros(layout)).sent;
  } else if (scheme == tcs::Scheme::randk) {
    su = tcs::shared_mask_compress(u, tcs::randk_mask(layout, kg, 0, 1), tcs::ErrorState::zeros(layout)).sent;
  } else {
    su = tcs::SparseUpdate{tcs::Mask::full(layout), v, tcs::Mask(layout), {}};
  }
  const double phi_wire = scheme == tcs::Scheme::topk ? phi_g : phi_l;
  auto p = tcs::encode_payload(su, q, phi_wire > 0 ? phi_wire : 1.0);
  return static_cast<double>(p.size_bits()) / (static_cast<double>(d) * H);
}

int cmd_budget(const BudgetArgs& a) {
  auto quantizer_for = [](double q) {
    if (q >= 32) return tcs::QuantizerSpec::none();
    if (q <= 1) return tcs::QuantizerSpec::scaled_sign();
    return tcs::QuantizerSpec::fractional_bits(static_cast<unsigned>(q));
  };
  if (a.table) {
    struct Row {
      const char* name;
      tcs::Scheme s;
      double q, g, l, H;
      double reported;
    };
    const Row rows[] = {
        {"top-K", tcs::Scheme::topk, 32, 0.01, 0, 1, 0.41},
        {"TCS", tcs::Scheme::tcs, 32, 0.01, 0.001, 1, 0.363},
        {"TCS-L2", tcs::Scheme::tcs, 32, 0.01, 0.001, 2, 0.1815},
        {"TCS-L4", tcs::Scheme::tcs, 32, 0.01, 0.001, 4, 0.0907},
        {"TCS-L4-Q5", tcs::Scheme::tcs, 5, 0.01, 0.001, 4, 0.01675},
        {"TCS-LF-Q5", tcs::Scheme::tcs, 5, 0.01, 0.001, 1, 0.067},
    };
    std::printf("%-10s %5s %6s %6s %3s %10s %10s%s\n", "scheme", "q", "phi_g", "phi_l", "H",
                "analytic", "reported", a.measured ? "   measured" : "");
    for (const auto& r : rows) {
      const double an = tcs::bit_budget(r.s, r.q, r.g, r.l, r.H);
      std::printf("%-10s %5g %6g %6g %3g %10.5f %10.5f", r.name, r.q, r.g, r.l, r.H, an, r.reported);
      if (a.measured)
        std::printf(" %10.5f", measured_budget(r.s, quantizer_for(r.q), r.g, r.l, r.H,
                                               a.d ? a.d : 1000000));
      std::printf("\n");
    }
    return kOk;
  }
  auto scheme = tcs::parse_scheme(a.scheme);
  if (!scheme) {
    std::cerr << "tcs budget: unknown scheme '" << a.scheme << "'\n";
    return kConfigError;
  }
  if (!(a.H >= 1) || !(a.phi_global > 0 && a.phi_global <= 1) ||
      (*scheme == tcs::Scheme::tcs && !(a.phi_local >= 0 && a.phi_local < a.phi_global))) {
    std::cerr << "tcs budget: need H >= 1, 0 < phi_global <= 1, 0 <= phi_local < phi_global\n";
    return kConfigError;
  }
  const double l = *scheme == tcs::Scheme::tcs ? a.phi_local : 0.0;
  std::printf("analytic %.6f\n", tcs::bit_budget(*scheme, a.q, a.phi_global, l, a.H));
  if (a.d)
    std::printf("log2d    %.6f\n", tcs::bit_budget(*scheme, a.q, a.phi_global, l, a.H, a.d,
                                                   tcs::PositionCost::log2d));
  if (a.measured)
    std::printf("measured %.6f\n", measured_budget(*scheme, quantizer_for(a.q), a.phi_global, l,
                                                   a.H, a.d ? a.d : 1000000));
  return kOk;
}

// -----------------------------------------------------------------------------
// encode / decode

struct CodecArgs {
  std::string input, output, global_mask;
  double phi = 0.25;
  std::string quantizer = "none";
  std::uint32_t levels = 16;
  std::uint32_t round = 0;
};

int cmd_encode(const CodecArgs& a) {
  auto values = parse_values(read_text(a.input), a.input);
  if (values.empty()) throw IoError(a.input + ": no values");
  auto layout = tcs::LayerLayout::make({values.size()});
  tcs::ParamVector v(layout, values);
  tcs::Mask g = load_mask(a.global_mask, layout);
  std::vector<std::uint32_t> local;
  for (std::uint32_t i = 0; i < values.size(); ++i)
    if (values[i] != 0.0 && !g.contains(i)) local.push_back(i);
  tcs::Mask lm(layout, std::move(local));

  auto kind = tcs::parse_quantizer_kind(a.quantizer);
  if (!kind) {
    std::cerr << "tcs encode: unknown quantizer '" << a.quantizer << "'\n";
    return kConfigError;
  }
  tcs::QuantizerSpec spec = *kind == tcs::QuantizerKind::fractional ? tcs::QuantizerSpec::fractional(a.levels)
                            : *kind == tcs::QuantizerKind::scaled_sign ? tcs::QuantizerSpec::scaled_sign()
                                                                       : tcs::QuantizerSpec::none();
  if (!(a.phi > 0 && a.phi <= 1)) {
    std::cerr << "tcs encode: --phi must be in (0, 1]\n";
    return kConfigError;
  }
  tcs::SparseUpdate su{g, tcs::gather(v, g), lm, tcs::gather(v, lm)};
  auto p = tcs::encode_payload(su, spec, a.phi, a.round);
  write_atomic(a.output, std::string(p.bytes.begin(), p.bytes.end()));
  std::printf("d %zu  K_global %zu  K_local %zu  bytes %zu\n", values.size(), g.popcount(),
              lm.popcount(), p.bytes.size());
  return kOk;
}

int cmd_decode(const CodecArgs& a) {
  auto bytes = read_bytes(a.input);
  auto h = tcs::read_payload_header(bytes);
  auto layout = tcs::LayerLayout::make({std::max<std::size_t>(h.d, 1)});
  tcs::Mask g = load_mask(a.global_mask, layout);
  auto su = tcs::decode_payload(bytes, g);
  std::string out;
  const tcs::ParamVector dense = su.to_dense();
  for (double x : dense.values()) out += tcs::format_real(x) + '\n';
  write_atomic(a.output, out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-correlated sparsification toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run a federated training experiment");
  run_cmd->add_option("--config", run.config, "Config file (key = value or JSON)")->required();
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--seed", run.seed, "Override the config seed");
  run_cmd->add_option("--set", run.overrides, "Override a config field, key=value")->take_all();
  run_cmd->add_flag("--force", run.force, "Replace an existing output directory");
  run_cmd->add_flag("--wall-clock", run.wall_clock, "Record per-round wall time in wall_ms");

  BudgetArgs budget;
  auto* budget_cmd = app.add_subcommand("budget", "Uplink bits per parameter per iteration");
  budget_cmd->add_option("--scheme", budget.scheme, "none|topk|randk|tcs")->capture_default_str();
  budget_cmd->add_option("--q", budget.q, "Bits per value")->capture_default_str();
  budget_cmd->add_option("--phi-global", budget.phi_global)->capture_default_str();
  budget_cmd->add_option("--phi-local", budget.phi_local)->capture_default_str();
  budget_cmd->add_option("--H", budget.H, "Local steps per round")->capture_default_str();
  budget_cmd->add_option("--d", budget.d, "Model size for the log2(d) variant and --measured");
  budget_cmd->add_flag("--measured", budget.measured, "Also encode a payload and measure it");
  budget_cmd->add_flag("--table", budget.table, "Print the reference budget table");

  CodecArgs enc;
  auto* enc_cmd = app.add_subcommand("encode", "Encode a dense value file as a payload");
  enc_cmd->add_option("values", enc.input, "One value per line; nonzeros are sent")->required();
  enc_cmd->add_option("payload", enc.output, "Output payload file")->required();
  enc_cmd->add_option("--phi", enc.phi, "Local ratio; block size is ceil(1/phi)")->capture_default_str();
  enc_cmd->add_option("--quantizer", enc.quantizer, "none|scaled_sign|fractional")->capture_default_str();
  enc_cmd->add_option("--levels", enc.levels, "Fractional interval count P")->capture_default_str();
  enc_cmd->add_option("--global-mask", enc.global_mask, "Indices known to the receiver");
  enc_cmd->add_option("--round", enc.round, "Round number stored in the header");

  CodecArgs dec;
  auto* dec_cmd = app.add_subcommand("decode", "Decode a payload to a dense value file");
  dec_cmd->add_option("payload", dec.input, "Payload file")->required();
  dec_cmd->add_option("values", dec.output, "Output value file")->required();
  dec_cmd->add_option("--global-mask", dec.global_mask, "Receiver's global mask indices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kFailure;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*budget_cmd) return cmd_budget(budget);
    if (*enc_cmd) return cmd_encode(enc);
    if (*dec_cmd) return cmd_decode(dec);
  } catch (const tcs::MalformedPayload& e) {
    std::cerr << "tcs: " << e.what() << '\n';
    return kMalformed;
  } catch (const tcs::ConfigFieldError& e) {
    std::cerr << "tcs: " << e.what() << '\n';
    return kConfigError;
  } catch (const tcs::Diverged& e) {
    std::cerr << "tcs: " << e.what() << '\n';
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "tcs: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
