// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The fibereq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fibereq/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fibereq/csv.hpp"

namespace fibereq {

namespace pt = boost::property_tree;

std::vector<double> DbpSettings::xi_grid() const {
  std::vector<double> g;
  const int n = static_cast<int>(std::floor((xi_max - xi_min) / xi_step + 1e-9));
  for (int i = 0; i <= n; ++i) g.push_back(xi_min + xi_step * i);
  return g;
}

namespace {

struct Entry {
  std::string section;
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& s) {
  try {
    return parse_double(trim(s));
  } catch (const std::exception&) {
    throw ConfigError("not a number: '" + s + "'");
  }
}

long long to_int(const std::string& s) {
  const std::string t = trim(s);
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(t, &pos);
  } catch (const std::exception&) {
    throw ConfigError("not an integer: '" + s + "'");
  }
  if (pos != t.size()) throw ConfigError("not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  throw ConfigError("not a boolean: '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  for (auto& f : split_csv(s)) out.push_back(trim(f));
  return out;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F fmt) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += fmt(v[i]);
  }
  return s;
}

std::string fmt_int(long long v) { return std::to_string(v); }

#define FQ_DOUBLE(sec, key, member)                                                   \
  Entry{sec, key, [](const ExperimentConfig& c) { return format_double(c.member); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = to_double(v); }}
#define FQ_INT(sec, key, member, type)                                                 \
  Entry{sec, key, [](const ExperimentConfig& c) { return fmt_int(static_cast<long long>(c.member)); }, \
        [](ExperimentConfig& c, const std::string& v) { c.member = static_cast<type>(to_int(v)); }}

const std::vector<Entry>& schema() {
  static const std::vector<Entry> entries = {
      FQ_DOUBLE("link", "alpha_db_per_km", link.alpha_db_per_km),
      FQ_DOUBLE("link", "dispersion_ps_nm_km", link.dispersion_ps_nm_km),
      FQ_DOUBLE("link", "gamma_w_km", link.gamma_w_km),
      FQ_DOUBLE("link", "lambda_nm", link.lambda_nm),
      FQ_DOUBLE("link", "span_km", link.span_km),
      FQ_INT("link", "n_spans", link.n_spans, int),
      FQ_DOUBLE("link", "edfa_nf_db", link.edfa_nf_db),
      FQ_DOUBLE("link", "step_km", link.step_km),
      FQ_DOUBLE("signal", "symbol_rate_bd", signal.symbol_rate_bd),
      FQ_DOUBLE("signal", "rolloff", signal.rolloff),
      FQ_INT("signal", "sps", signal.sps, int),
      FQ_INT("signal", "log2_symbols", signal.log2_symbols, int),
      FQ_INT("signal", "cdc_taps", signal.cdc_taps, int),
      FQ_DOUBLE("noise", "target_cdc_peak_q_db", noise.target_cdc_peak_q_db),
      FQ_DOUBLE("noise", "sigma_0dbm", noise.sigma_0dbm),
      FQ_INT("split", "guard", split.guard, std::size_t),
      FQ_INT("split", "train", split.train, std::size_t),
      FQ_INT("split", "validation", split.validation, std::size_t),
      FQ_INT("split", "test", split.test, std::size_t),
      FQ_INT("seeds", "bits", seeds.bits, std::uint64_t),
      FQ_INT("seeds", "ase", seeds.ase, std::uint64_t),
      FQ_INT("seeds", "noise", seeds.noise, std::uint64_t),
      FQ_INT("seeds", "init", seeds.init, std::uint64_t),
      FQ_INT("seeds", "train", seeds.train, std::uint64_t),
      Entry{"experiment", "powers_dbm",
            [](const ExperimentConfig& c) { return join(c.powers_dbm, format_double); },
            [](ExperimentConfig& c, const std::string& v) {
              c.powers_dbm.clear();
              for (const auto& f : split_list(v)) c.powers_dbm.push_back(to_double(f));
            }},
      Entry{"experiment", "architectures",
            [](const ExperimentConfig& c) {
              return join(c.architectures, [](nn::Architecture a) { return nn::to_string(a); });
            },
            [](ExperimentConfig& c, const std::string& v) {
              c.architectures.clear();
              for (const auto& f : split_list(v)) {
                try {
                  c.architectures.push_back(nn::architecture_from_string(f));
                } catch (const InvalidArgument& e) {
                  throw ConfigError(e.what());
                }
              }
            }},
      Entry{"experiment", "output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
            [](ExperimentConfig& c, const std::string& v) { c.output_dir = trim(v); }},
      FQ_INT("experiment", "threads", threads, int),
      FQ_INT("model", "features", dims.features, int),
      FQ_INT("model", "window", dims.window, int),
      FQ_INT("model", "hidden", dims.hidden, int),
      FQ_INT("model", "hidden_kernel", dims.hidden_kernel, int),
      FQ_INT("model", "out_kernel", dims.out_kernel, int),
      FQ_INT("model", "outputs", dims.outputs, int),
      FQ_INT("train", "batch_size", training.train.batch_size, int),
      FQ_DOUBLE("train", "learning_rate", training.train.learning_rate),
      FQ_INT("train", "max_epochs", training.train.max_epochs, int),
      FQ_INT("train", "symbols_per_epoch", training.train.symbols_per_epoch, std::size_t),
      FQ_INT("train", "patience", training.train.patience, int),
      FQ_DOUBLE("train", "anchor_power_dbm", training.anchor_power_dbm),
      FQ_INT("train", "warm_start_epochs", training.warm_start_epochs, int),
      Entry{"sweep", "taylor_orders",
            [](const ExperimentConfig& c) { return join(c.sweep.taylor_orders, fmt_int); },
            [](ExperimentConfig& c, const std::string& v) {
              c.sweep.taylor_orders.clear();
              for (const auto& f : split_list(v)) c.sweep.taylor_orders.push_back(static_cast<int>(to_int(f)));
            }},
      Entry{"sweep", "pwl_segments",
            [](const ExperimentConfig& c) { return join(c.sweep.pwl_segments, fmt_int); },
            [](ExperimentConfig& c, const std::string& v) {
              c.sweep.pwl_segments.clear();
              for (const auto& f : split_list(v)) c.sweep.pwl_segments.push_back(static_cast<int>(to_int(f)));
            }},
      Entry{"sweep", "lut_bits",
            [](const ExperimentConfig& c) { return join(c.sweep.lut_bits, fmt_int); },
            [](ExperimentConfig& c, const std::string& v) {
              c.sweep.lut_bits.clear();
              for (const auto& f : split_list(v)) c.sweep.lut_bits.push_back(static_cast<int>(to_int(f)));
            }},
      FQ_INT("sweep", "retrain_epochs", sweep.retrain_epochs, int),
      FQ_DOUBLE("sweep", "retrain_learning_rate", sweep.retrain_learning_rate),
      Entry{"sweep", "search_taylor_boundary",
            [](const ExperimentConfig& c) { return std::string(c.sweep.search_taylor_boundary ? "true" : "false"); },
            [](ExperimentConfig& c, const std::string& v) { c.sweep.search_taylor_boundary = to_bool(v); }},
      FQ_INT("dbp", "steps_per_span", dbp.steps_per_span, int),
      FQ_DOUBLE("dbp", "sps", dbp.sps),
      FQ_DOUBLE("dbp", "xi_min", dbp.xi_min),
      FQ_DOUBLE("dbp", "xi_max", dbp.xi_max),
      FQ_DOUBLE("dbp", "xi_step", dbp.xi_step),
      FQ_INT("quantize", "frac_bits", frac_bits, int),
  };
  return entries;
}

#undef FQ_DOUBLE
#undef FQ_INT

std::string serialize_sections(const ExperimentConfig& cfg, const std::set<std::string>* only) {
  std::ostringstream os;
  std::string current;
  for (const auto& e : schema()) {
    if (only && !only->count(e.section)) continue;
    if (e.section != current) {
      if (!current.empty()) os << '\n';
      os << '[' << e.section << "]\n";
      current = e.section;
    }
    os << e.key << " = " << e.get(cfg) << '\n';
  }
  return os.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    link.validate();
    dims.validate();
    training.train.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(signal.symbol_rate_bd > 0.0, "signal.symbol_rate_bd must be positive");
  check(signal.rolloff > 0.0 && signal.rolloff <= 1.0, "signal.rolloff must lie in (0, 1]");
  check(signal.sps >= 2, "signal.sps must be >= 2");
  check(signal.log2_symbols >= 8 && signal.log2_symbols <= 22, "signal.log2_symbols must lie in 8..22");
  check(signal.cdc_taps > 0 && signal.cdc_taps % 2 == 1, "signal.cdc_taps must be odd");
  check(noise.target_cdc_peak_q_db >= 0.0, "noise.target_cdc_peak_q_db must be >= 0");
  check(noise.sigma_0dbm >= 0.0, "noise.sigma_0dbm must be >= 0");
  check(split.train > 0 && split.validation > 0 && split.test > 0, "split sizes must be positive");
  check(2 * split.guard + split.train + split.validation + split.test <=
            (std::size_t{1} << signal.log2_symbols),
        "splits plus guards exceed 2^log2_symbols");
  check(!powers_dbm.empty(), "experiment.powers_dbm is empty");
  check(std::set<double>(powers_dbm.begin(), powers_dbm.end()).size() == powers_dbm.size(),
        "experiment.powers_dbm has duplicates");
  check(!architectures.empty(), "experiment.architectures is empty");
  check(!output_dir.empty(), "experiment.output_dir is empty");
  check(threads >= 1, "experiment.threads must be >= 1");
  check(training.warm_start_epochs >= 0, "train.warm_start_epochs must be >= 0");
  check(std::find(powers_dbm.begin(), powers_dbm.end(), training.anchor_power_dbm) != powers_dbm.end(),
        "train.anchor_power_dbm must be one of experiment.powers_dbm");
  for (int o : sweep.taylor_orders) check(o >= 1 && o <= 9 && o % 2 == 1, "sweep.taylor_orders must be odd in 1..9");
  for (int s : sweep.pwl_segments) check(s == 3 || s == 5 || s == 7 || s == 9, "sweep.pwl_segments must be 3, 5, 7 or 9");
  for (int b : sweep.lut_bits) check(b >= 2 && b <= 16, "sweep.lut_bits must lie in 2..16");
  check(sweep.retrain_epochs >= 0, "sweep.retrain_epochs must be >= 0");
  check(sweep.retrain_learning_rate > 0.0, "sweep.retrain_learning_rate must be positive");
  check(dbp.steps_per_span >= 1, "dbp.steps_per_span must be >= 1");
  check(dbp.sps >= 1.0, "dbp.sps must be >= 1");
  check(dbp.xi_step > 0.0 && dbp.xi_max >= dbp.xi_min, "dbp xi grid is empty");
  check(frac_bits > 0 && frac_bits < 31, "quantize.frac_bits must lie in 1..30");
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::map<std::string, std::map<std::string, const Entry*>> known;
  for (const auto& e : schema()) known[e.section][e.key] = &e;
  ExperimentConfig cfg;
  for (const auto& [section, body] : tree) {
    auto sec = known.find(section);
    if (sec == known.end()) throw ConfigError("unknown config section [" + section + "]");
    if (!body.data().empty() && body.empty()) {
      throw ConfigError("key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      auto it = sec->second.find(key);
      if (it == sec->second.end()) throw ConfigError("unknown config key " + section + "." + key);
      try {
        it->second->set(cfg, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
      }
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  return serialize_sections(cfg, nullptr);
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* dir = std::getenv("FIBEREQ_OUTPUT_DIR"); dir && *dir) cfg.output_dir = dir;
  if (const char* t = std::getenv("FIBEREQ_THREADS"); t && *t) {
    const long long n = to_int(t);
    if (n < 1) throw ConfigError("FIBEREQ_THREADS must be >= 1");
    cfg.threads = static_cast<int>(n);
  }
}

std::string config_hash(const ExperimentConfig& cfg, Stage stage) {
  std::set<std::string> sections{"link", "signal", "noise", "split", "seeds"};
  std::string extra = "powers=" + join(cfg.powers_dbm, format_double);
  if (stage == Stage::Baselines) sections.insert("dbp");
  if (stage == Stage::Train || stage == Stage::Sweep || stage == Stage::Quantize) {
    sections.insert("model");
    sections.insert("train");
  }
  if (stage == Stage::Sweep || stage == Stage::Quantize) sections.insert("sweep");
  if (stage == Stage::Quantize) sections.insert("quantize");
  const std::string text = serialize_sections(cfg, &sections) + extra;
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace fibereq
