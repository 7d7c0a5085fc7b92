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

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "fibereq/csv.hpp"
#include "fibereq/dsp.hpp"
#include "fibereq/experiment.hpp"

using namespace fibereq;
namespace ex = fibereq::experiment;

namespace {

// Exit codes by diagnostic category.
enum Exit : int {
  kOk = 0,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kNumeric = 5,
  kInvalid = 6,
  kInternal = 10,
};

void log_line(const std::string& msg) {
  std::cerr << "[fibereq] " << msg << std::endl;
}

template <typename F>
void timed(const ExperimentConfig& cfg, const std::string& name, Stage stage, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  body();
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ex::record_manifest(cfg, name, stage, dt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fiber nonlinearity equalizers: simulation, training, approximation sweeps"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  int threads = 0;
  app.add_option("-c,--config", config_path, "Experiment config (INI); built-in defaults otherwise");
  app.add_option("-o,--output-dir", output_dir, "Run directory (overrides config and FIBEREQ_OUTPUT_DIR)");
  app.add_option("-j,--threads", threads, "Worker threads (overrides config and FIBEREQ_THREADS)")
      ->check(CLI::PositiveNumber);

  auto* gen = app.add_subcommand("generate", "Simulate the link at every launch power and write datasets");
  auto* base = app.add_subcommand("baselines", "CDC and DBP Q-factor per launch power");
  auto* train = app.add_subcommand("train", "Train every architecture at every launch power");

  auto* retrain = app.add_subcommand("retrain", "Evaluate one approximation cell, optionally retrained");
  std::string family = "pwl";
  int level = 3;
  bool frozen = false;
  retrain->add_option("--family", family, "exact, taylor, pwl or lut")
      ->check(CLI::IsMember({"exact", "taylor", "pwl", "lut"}));
  retrain->add_option("--level", level, "Taylor order, PWL segments or LUT bits");
  retrain->add_flag("--no-retrain", frozen, "Only swap the activations, keep the weights");

  auto* sweep = app.add_subcommand("sweep-approx", "Taylor/PWL/LUT grid with and without retraining");
  auto* quant = app.add_subcommand("quantize", "int32 inference of the retrained PWL-3 model");

  auto* report = app.add_subcommand("report", "Write figure-ready CSVs and a summary");
  std::string tables = std::string(FIBEREQ_DATA_DIR) + "/published_tables.csv";
  report->add_option("--tables", tables, "Published implementation rows")->check(CLI::ExistingFile);

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  auto* exp_tab = app.add_subcommand("export-tables", "Write activation coefficient tables and CDC taps");
  std::string export_dir = "tables";
  exp_tab->add_option("dir", export_dir, "Destination directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    apply_env_overrides(cfg);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (threads > 0) cfg.threads = threads;
    cfg.validate();

    if (*show) {
      std::cout << serialize_config(cfg);
    } else if (*gen) {
      timed(cfg, "generate", Stage::Data, [&] {
        const auto s = ex::cmd_generate(cfg, log_line);
        std::cout << "sigma_0dbm," << format_double(s.sigma_0dbm) << '\n';
        for (const auto& f : s.files) std::cout << f << '\n';
      });
    } else if (*base) {
      timed(cfg, "baselines", Stage::Baselines, [&] {
        for (const auto& p : ex::cmd_baselines(cfg, log_line)) {
          std::cout << format_double(p.power_dbm) << ',' << p.method << ',' << format_double(p.test_q_db) << '\n';
        }
      });
    } else if (*train) {
      timed(cfg, "train", Stage::Train, [&] {
        for (const auto& p : ex::cmd_train(cfg, log_line)) {
          std::cout << format_double(p.power_dbm) << ',' << p.method << ',' << format_double(p.test_q_db) << '\n';
        }
      });
    } else if (*retrain) {
      timed(cfg, "retrain", Stage::Sweep, [&] {
        const auto c = ex::cmd_retrain(cfg, family, level, !frozen, log_line);
        std::cout << c.family << ',' << c.level << ',' << (c.retrained ? 1 : 0) << ','
                  << format_double(c.test_q_db) << '\n';
      });
    } else if (*sweep) {
      timed(cfg, "sweep-approx", Stage::Sweep, [&] {
        for (const auto& c : ex::cmd_sweep_approx(cfg, log_line)) {
          std::cout << c.family << ',' << c.level << ',' << (c.retrained ? 1 : 0) << ','
                    << format_double(c.test_q_db) << '\n';
        }
      });
    } else if (*quant) {
      timed(cfg, "quantize", Stage::Quantize, [&] {
        const auto s = ex::cmd_quantize(cfg, log_line);
        std::cout << "float_q_db," << format_double(s.float_q_db) << "\nfixed_q_db,"
                  << format_double(s.fixed_q_db) << '\n';
      });
    } else if (*report) {
      timed(cfg, "report", Stage::Quantize, [&] {
        for (const auto& f : ex::cmd_report(cfg, tables, log_line)) std::cout << f << '\n';
      });
    } else if (*exp_tab) {
      std::filesystem::create_directories(export_dir);
      for (auto fn : {act::Function::Tanh, act::Function::Sigmoid}) {
        const std::string name = act::to_string(fn);
        for (int n : {3, 5, 7, 9}) {
          write_file_atomic(export_dir + "/pwl-" + std::to_string(n) + "-" + name + ".csv",
                            activation_to_csv(act::make_pwl(fn, n)));
          write_file_atomic(export_dir + "/taylor-" + std::to_string(n) + "-" + name + ".csv",
                            activation_to_csv(act::make_taylor(fn, n, act::default_taylor_boundary(fn, n))));
        }
        for (int b : cfg.sweep.lut_bits) {
          write_file_atomic(export_dir + "/lut-" + std::to_string(b) + "-" + name + ".csv",
                            activation_to_csv(act::build_lut(fn, b)));
        }
      }
      const double fs = cfg.signal.sps * cfg.signal.symbol_rate_bd;
      const CdcFilter cdc = design_cdc(cfg.link, cfg.signal.cdc_taps, fs,
                                       (1.0 + cfg.signal.rolloff) * cfg.signal.symbol_rate_bd);
      write_file_atomic(export_dir + "/cdc-taps.csv", taps_to_csv(cdc.taps));
      std::cout << export_dir << '\n';
    }
    return kOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}
