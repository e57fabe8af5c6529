#pragma once

// Flat key=value settings for the command-line tool. Blank lines and lines
// starting with '#' are ignored; unknown keys are rejected. Values from a file
// are applied first, then command-line overrides, then everything is
// validated before any work starts.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "citl/csv.hpp"
#include "citl/data.hpp"
#include "citl/eval.hpp"

namespace citl {

/// Defaults are the synthetic benchmark's settings.
struct Settings {
  TaskConfig task = synthetic_benchmark().task;
  SynthConfig synth = synthetic_benchmark().synth;
  std::size_t feature_dim = kDefaultFeatureDim;  // resampling width for raw traces
  std::uint64_t seed = 1;
};

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys{
      "seed",    "L_max",   "T_max",    "eps",      "gamma_list", "r",        "fallback_rounds",
      "force_accept", "activation", "C", "source_eps", "C_T", "C_Tu", "eta", "k_nn", "mode",
      "labeled", "semisup", "baseline_C", "task", "n_cycles", "d", "shift", "noise_sd",
      "fade_rate", "fade_exponent", "feature_dim"};
  return keys;
}

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline KeyValues parse_key_values(std::istream& in, const std::string& origin) {
  KeyValues out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line_no) + ": expected key=value");
    }
    out.emplace_back(csv::detail::trim(std::string_view(line).substr(0, eq)),
                     csv::detail::trim(std::string_view(line).substr(eq + 1)));
  }
  return out;
}

inline KeyValues read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path);
  return parse_key_values(in, path);
}

namespace detail {

inline double as_double(const std::string& key, const std::string& v) {
  try {
    return csv::parse_double(v, 0);
  } catch (const Error&) {
    throw Error(ErrorCode::InvalidConfig, key + ": not a number: '" + v + "'");
  }
}

inline std::size_t as_count(const std::string& key, const std::string& v) {
  const double x = as_double(key, v);
  if (x < 0 || x != std::floor(x)) throw Error(ErrorCode::InvalidConfig, key + ": expected a non-negative integer");
  return static_cast<std::size_t>(x);
}

inline bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error(ErrorCode::InvalidConfig, key + ": expected true or false");
}

}  // namespace detail

inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  using detail::as_count;
  using detail::as_double;
  TaskConfig& t = s.task;
  GrowConfig& tg = t.target.growth;
  auto both = [&](auto fn) {
    fn(t.source);
    fn(tg);
  };
  if (key == "seed") {
    s.seed = as_count(key, value);
  } else if (key == "L_max") {
    const auto v = as_count(key, value);
    both([&](GrowConfig& g) { g.max_nodes = v; });
  } else if (key == "T_max") {
    const auto v = as_count(key, value);
    both([&](GrowConfig& g) { g.candidates = v; });
  } else if (key == "eps") {
    tg.eps = as_double(key, value);
  } else if (key == "source_eps") {
    t.source.eps = as_double(key, value);
  } else if (key == "gamma_list") {
    Vector gammas;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) gammas.push_back(as_double(key, csv::detail::trim(item)));
    both([&](GrowConfig& g) { g.gamma_list = gammas; });
  } else if (key == "r") {
    const double v = as_double(key, value);
    both([&](GrowConfig& g) { g.r = v; });
  } else if (key == "fallback_rounds") {
    const auto v = as_count(key, value);
    both([&](GrowConfig& g) { g.fallback_rounds = v; });
  } else if (key == "force_accept") {
    const bool v = detail::as_bool(key, value);
    both([&](GrowConfig& g) { g.force_accept = v; });
  } else if (key == "activation") {
    const Activation a = parse_activation(value);
    both([&](GrowConfig& g) { g.activation = a; });
  } else if (key == "C") {
    t.source.C = as_double(key, value);
  } else if (key == "C_T") {
    t.target.c_t = as_double(key, value);
  } else if (key == "C_Tu") {
    t.target.c_tu = as_double(key, value);
  } else if (key == "eta") {
    t.target.eta = as_double(key, value);
  } else if (key == "k_nn") {
    t.target.k_nn = as_count(key, value);
  } else if (key == "mode") {
    t.target.mode = parse_weight_mode(value);
  } else if (key == "labeled") {
    t.split.labeled_count = as_count(key, value);
  } else if (key == "semisup") {
    t.split.semisup_unlabeled_count = as_count(key, value);
  } else if (key == "baseline_C") {
    t.baseline_c = as_double(key, value);
  } else if (key == "task") {
    if (value.empty() || value.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "task: name must be non-empty and free of commas");
    }
    t.name = value;
  } else if (key == "n_cycles") {
    s.synth.n_cycles = as_count(key, value);
  } else if (key == "d") {
    s.synth.d = as_count(key, value);
  } else if (key == "feature_dim") {
    s.feature_dim = as_count(key, value);
  } else if (key == "shift") {
    s.synth.shift = as_double(key, value);
  } else if (key == "noise_sd") {
    s.synth.noise_sd = as_double(key, value);
  } else if (key == "fade_rate") {
    s.synth.fade_rate = as_double(key, value);
  } else if (key == "fade_exponent") {
    s.synth.fade_exponent = as_double(key, value);
  } else {
    throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
  }
}

inline void apply_settings(Settings& s, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply_setting(s, k, v);
}

inline void validate(const Settings& s) {
  validate(s.task.source);
  validate(s.task.target);
  if (s.task.split.labeled_count < 1 || s.task.split.semisup_unlabeled_count < 1) {
    throw Error(ErrorCode::InvalidConfig, "labeled and semisup must be >= 1");
  }
  if (!(s.task.baseline_c > 0.0)) throw Error(ErrorCode::InvalidConfig, "baseline_C must be positive");
  validate(s.synth);
  if (s.feature_dim < 2) throw Error(ErrorCode::InvalidConfig, "feature_dim must be >= 2");
}

inline nlohmann::ordered_json to_json(const Settings& s) {
  auto j = to_json(s.task);
  j["feature_dim"] = s.feature_dim;
  j["seed"] = s.seed;
  return j;
}

inline nlohmann::ordered_json to_json(const SynthConfig& c) {
  return {{"n_cycles", c.n_cycles}, {"d", c.d},
          {"shift", c.shift},       {"noise_sd", c.noise_sd},
          {"fade_rate", c.fade_rate}, {"fade_exponent", c.fade_exponent},
          {"seed", c.seed}};
}

}  // namespace citl
