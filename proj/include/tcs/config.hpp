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

// Experiment config files.
//
// Flat "key = value" lines; '#' starts a comment. A file whose first
// non-blank character is '{' is read as a JSON object with the same keys.
// Every key below is required unless marked optional or conditional.
//
//   clients, local_steps, epochs, batch_size          integers
//   scheme                 none | topk | randk | tcs
//   phi_global             real   (scheme != none)
//   phi_local              real   (scheme = tcs)
//   fairness               none | plf | lf            optional, default none
//   phi_min_global         real   (fairness != none)
//   phi_min_local          real   (fairness = lf)
//   quantizer              none | scaled_sign | fractional   optional, default none
//   quantizer_levels       integer P  (quantizer = fractional)
//   lr_reference, lr_reference_batch, warmup_epochs
//   milestones             "epoch:factor,epoch:factor" (may be empty)
//   weight_decay           real
//   momentum               real in [0, 1)             optional, default 0
//   seed                   integer
//   model                  logreg | mlp
//   hidden                 integer (model = mlp)
//   classes, features      integers
//   train_samples, test_samples, cluster_spread       (unless train_csv is set)
//   train_csv, test_csv    paths                      optional

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcs/fedsim.hpp"

namespace tcs {

/// A field-level configuration problem.
class ConfigFieldError : public std::runtime_error {
 public:
  ConfigFieldError(std::string field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "clients", "local_steps", "epochs", "batch_size", "scheme", "phi_global", "phi_local",
      "fairness", "phi_min_global", "phi_min_local", "quantizer", "quantizer_levels",
      "lr_reference", "lr_reference_batch", "warmup_epochs", "milestones", "weight_decay",
      "momentum", "seed", "model", "hidden", "classes", "features", "train_samples",
      "test_samples", "cluster_spread", "train_csv", "test_csv"};
  return keys;
}

inline ConfigMap parse_json_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigFieldError("<file>", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigFieldError("<file>", "JSON config must be an object");
  ConfigMap out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& v = it.value();
    if (it.key() == "milestones" && v.is_array()) {
      std::string s;
      for (const auto& m : v) {
        if (!m.is_array() || m.size() != 2 || !m[0].is_number() || !m[1].is_number())
          throw ConfigFieldError("milestones", "expected [[epoch, factor], ...]");
        if (!s.empty()) s += ',';
        s += m[0].dump() + ":" + m[1].dump();
      }
      out[it.key()] = s;
    } else if (v.is_string()) {
      out[it.key()] = v.get<std::string>();
    } else if (v.is_number() || v.is_boolean()) {
      out[it.key()] = v.dump();
    } else {
      throw ConfigFieldError(it.key(), "expected a scalar value");
    }
  }
  return out;
}

}  // namespace detail

/// Raw key/value pairs; rejects unknown keys, duplicates and malformed lines.
inline ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    out = detail::parse_json_config(text);
  } else {
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigFieldError("<line " + std::to_string(lineno) + ">", "expected key = value");
      const std::string key = detail::trim(line.substr(0, eq));
      if (out.count(key)) throw ConfigFieldError(key, "given more than once");
      out[key] = detail::trim(line.substr(eq + 1));
    }
  }
  for (const auto& [k, v] : out)
    if (!detail::known_keys().count(k)) throw ConfigFieldError(k, "unknown key");
  return out;
}

/// Applies "key=value" overrides on top of a parsed map.
inline void apply_override(ConfigMap& m, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigFieldError(assignment, "override must be key=value");
  const std::string key = detail::trim(assignment.substr(0, eq));
  if (!detail::known_keys().count(key)) throw ConfigFieldError(key, "unknown key");
  m[key] = detail::trim(assignment.substr(eq + 1));
}

namespace detail {

class FieldReader {
 public:
  explicit FieldReader(const ConfigMap& m) : m_(m) {}

  bool has(const std::string& k) const { return m_.count(k) != 0; }

  const std::string& raw(const std::string& k) const {
    auto it = m_.find(k);
    if (it == m_.end()) throw ConfigFieldError(k, "missing (every field must be given explicitly)");
    return it->second;
  }

  std::uint64_t integer(const std::string& k) const {
    const std::string& s = raw(k);
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw ConfigFieldError(k, "expected a non-negative integer, got '" + s + "'");
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ConfigFieldError(k, "integer out of range: '" + s + "'");
    }
  }

  double real(const std::string& k) const { return parse_real(k, raw(k)); }

  static double parse_real(const std::string& k, const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(v))
      throw ConfigFieldError(k, "expected a real number, got '" + s + "'");
    return v;
  }

 private:
  const ConfigMap& m_;
};

}  // namespace detail

inline ExperimentConfig build_config(const ConfigMap& m) {
  detail::FieldReader r(m);
  ExperimentConfig c;
  c.clients = r.integer("clients");
  c.local_steps = r.integer("local_steps");
  c.epochs = r.integer("epochs");
  c.batch_size = r.integer("batch_size");

  auto scheme = parse_scheme(r.raw("scheme"));
  if (!scheme) throw ConfigFieldError("scheme", "expected none|topk|randk|tcs");
  c.compressor.scheme = *scheme;
  c.compressor.phi_global = 1.0;
  c.compressor.phi_local = 0.0;
  if (*scheme != Scheme::none) c.compressor.phi_global = r.real("phi_global");
  if (*scheme == Scheme::tcs) c.compressor.phi_local = r.real("phi_local");
  if (r.has("fairness")) {
    auto f = parse_fairness(r.raw("fairness"));
    if (!f) throw ConfigFieldError("fairness", "expected none|plf|lf");
    c.compressor.fairness = *f;
  }
  if (c.compressor.fairness != Fairness::none) c.compressor.phi_min_global = r.real("phi_min_global");
  if (c.compressor.fairness == Fairness::lf) c.compressor.phi_min_local = r.real("phi_min_local");

  if (r.has("quantizer")) {
    auto k = parse_quantizer_kind(r.raw("quantizer"));
    if (!k) throw ConfigFieldError("quantizer", "expected none|scaled_sign|fractional");
    switch (*k) {
      case QuantizerKind::none: c.quantizer = QuantizerSpec::none(); break;
      case QuantizerKind::scaled_sign: c.quantizer = QuantizerSpec::scaled_sign(); break;
      case QuantizerKind::fractional: {
        const auto P = r.integer("quantizer_levels");
        if (P < 1 || P > 65535) throw ConfigFieldError("quantizer_levels", "must be in [1, 65535]");
        c.quantizer = QuantizerSpec::fractional(static_cast<std::uint32_t>(P));
        break;
      }
    }
  }

  c.lr_reference = r.real("lr_reference");
  c.lr_reference_batch = r.integer("lr_reference_batch");
  c.warmup_epochs = r.real("warmup_epochs");
  {
    const std::string s = r.raw("milestones");
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      const auto colon = item.find(':');
      if (colon == std::string::npos)
        throw ConfigFieldError("milestones", "expected epoch:factor entries, got '" + item + "'");
      c.milestones.push_back(
          {detail::FieldReader::parse_real("milestones", detail::trim(item.substr(0, colon))),
           detail::FieldReader::parse_real("milestones", detail::trim(item.substr(colon + 1)))});
    }
  }
  c.weight_decay = r.real("weight_decay");
  if (r.has("momentum")) c.momentum = r.real("momentum");
  c.seed = r.integer("seed");

  const std::string& model = r.raw("model");
  if (model == "logreg") {
    c.data.model.kind = ModelKind::logreg;
  } else if (model == "mlp") {
    c.data.model.kind = ModelKind::mlp;
    c.data.model.hidden = r.integer("hidden");
  } else {
    throw ConfigFieldError("model", "expected logreg|mlp");
  }
  c.data.model.classes = r.integer("classes");
  c.data.model.features = r.integer("features");
  if (r.has("train_csv")) c.data.train_csv = r.raw("train_csv");
  if (r.has("test_csv")) c.data.test_csv = r.raw("test_csv");
  if (c.data.train_csv.empty()) {
    c.data.train_samples = r.integer("train_samples");
    c.data.test_samples = r.integer("test_samples");
    c.data.cluster_spread = r.real("cluster_spread");
  }

  if (auto err = validate(c)) throw ConfigFieldError(err->field, err->message);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text,
                                     const std::vector<std::string>& overrides = {}) {
  ConfigMap m = parse_config_text(text);
  for (const auto& o : overrides) apply_override(m, o);
  return build_config(m);
}

/// Fully explicit key = value rendering; parse_config() of the output yields
/// an identical configuration.
inline std::string write_config(const ExperimentConfig& c) {
  std::ostringstream os;
  auto kv = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto num = [](auto v) { return std::to_string(v); };
  kv("clients", num(c.clients));
  kv("local_steps", num(c.local_steps));
  kv("epochs", num(c.epochs));
  kv("batch_size", num(c.batch_size));
  kv("scheme", to_string(c.compressor.scheme));
  if (c.compressor.scheme != Scheme::none) kv("phi_global", format_real(c.compressor.phi_global));
  if (c.compressor.scheme == Scheme::tcs) kv("phi_local", format_real(c.compressor.phi_local));
  kv("fairness", to_string(c.compressor.fairness));
  if (c.compressor.fairness != Fairness::none)
    kv("phi_min_global", format_real(c.compressor.phi_min_global));
  if (c.compressor.fairness == Fairness::lf)
    kv("phi_min_local", format_real(c.compressor.phi_min_local));
  kv("quantizer", to_string(c.quantizer.kind));
  if (c.quantizer.kind == QuantizerKind::fractional) kv("quantizer_levels", num(c.quantizer.P));
  kv("lr_reference", format_real(c.lr_reference));
  kv("lr_reference_batch", num(c.lr_reference_batch));
  kv("warmup_epochs", format_real(c.warmup_epochs));
  std::string ms;
  for (const auto& m : c.milestones) {
    if (!ms.empty()) ms += ',';
    ms += format_real(m.epoch) + ":" + format_real(m.factor);
  }
  kv("milestones", ms);
  kv("weight_decay", format_real(c.weight_decay));
  kv("momentum", format_real(c.momentum));
  kv("seed", num(c.seed));
  kv("model", to_string(c.data.model.kind));
  if (c.data.model.kind == ModelKind::mlp) kv("hidden", num(c.data.model.hidden));
  kv("classes", num(c.data.model.classes));
  kv("features", num(c.data.model.features));
  if (c.data.train_csv.empty()) {
    kv("train_samples", num(c.data.train_samples));
    kv("test_samples", num(c.data.test_samples));
    kv("cluster_spread", format_real(c.data.cluster_spread));
  } else {
    kv("train_csv", c.data.train_csv);
    if (!c.data.test_csv.empty()) kv("test_csv", c.data.test_csv);
  }
  return os.str();
}

}  // namespace tcs
