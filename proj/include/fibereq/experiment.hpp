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

#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fibereq/config.hpp"
#include "fibereq/io.hpp"

namespace fibereq::experiment {

using LogFn = std::function<void(const std::string&)>;

/// File layout of a run directory.
struct RunLayout {
  std::string root;

  std::string dataset(double power_dbm) const;
  std::string data_stamp() const;
  std::string model(nn::Architecture arch, double power_dbm) const;
  std::string history(nn::Architecture arch, double power_dbm) const;
  std::string cell(const std::string& family, int level, bool retrained) const;
  std::string cell_model(const std::string& family, int level, bool retrained) const;
  std::string baselines_csv() const;
  std::string baselines_stamp() const;
  std::string nn_csv(nn::Architecture arch) const;
  std::string quantize_csv() const;
  std::string quantized_model() const;
  std::string manifest() const;
  std::string report_dir() const;
};

/// One Q measurement of a method at a launch power. xi is set for DBP.
struct QPoint {
  double power_dbm = 0.0;
  std::string method;
  double val_q_db = 0.0;
  double test_ber = 0.5;
  double test_q_db = 0.0;
  double xi = std::numeric_limits<double>::quiet_NaN();
};

/// Symbol positions of a split that sliding-window equalization covers
/// (relative to the split start).
struct Coverage {
  std::size_t first = 0;
  std::size_t count = 0;
};
Coverage covered(const nn::ModelDims& dims, std::size_t split_length);

/// BER of the H polarization of `rx` over positions [begin + cov.first,
/// begin + cov.first + cov.count) against the transmitted bits.
double covered_ber(const SymbolBlock& rx, const SymbolBlock& tx, std::size_t begin,
                   const Coverage& cov);

/// Noise std at 0 dBm such that the best CDC Q over the power sweep equals
/// target_q_db. `clean` holds the normalized, noise-free CDC outputs per
/// power; Q is measured over [begin, begin + count). Bisection on log sigma.
double calibrate_noise_sigma(const std::vector<SymbolBlock>& clean, const SymbolBlock& tx,
                             const std::vector<double>& powers_dbm, std::size_t begin,
                             std::size_t count, double target_q_db, std::uint64_t seed);

inline double noise_sigma_at(double sigma_0dbm, double power_dbm) {
  return sigma_0dbm * std::pow(10.0, -power_dbm / 20.0);
}

/// Received blocks for one power: CDC output and the link waveform.
struct Propagated {
  SymbolBlock transmitted;
  SymbolBlock cdc;  // normalized, noise-free
  SignalFrame waveform;
};
Propagated propagate(const ExperimentConfig& cfg, double power_dbm);

/// DBP receiver chain on a stored waveform: resample, back-propagate,
/// matched filter, normalize against the transmitted block and add the
/// same transceiver noise as the CDC path.
SymbolBlock dbp_receive(const Dataset& ds, const DbpSettings& settings, double xi);

struct GenerateSummary {
  double sigma_0dbm = 0.0;
  std::vector<std::string> files;
  bool reused = false;
};

/// Runs the link for every launch power and writes one dataset per power.
/// Existing datasets from the same data configuration are reused.
GenerateSummary cmd_generate(const ExperimentConfig& cfg, const LogFn& log = {});

/// CDC and DBP (xi chosen on validation) over the test coverage.
std::vector<QPoint> cmd_baselines(const ExperimentConfig& cfg, const LogFn& log = {});

/// Trains every architecture at every power: the anchor power from scratch,
/// the others warm-started from the neighbor closer to the anchor. Finished
/// models from the same configuration are reused.
std::vector<QPoint> cmd_train(const ExperimentConfig& cfg, const LogFn& log = {});

struct SweepCell {
  std::string family;  // exact, taylor, pwl, lut
  int level = 0;
  bool retrained = false;
  double val_q_db = 0.0;
  double test_ber = 0.5;
  double test_q_db = 0.0;
  double tanh_boundary = std::numeric_limits<double>::quiet_NaN();
  double sigmoid_boundary = std::numeric_limits<double>::quiet_NaN();
  int best_epoch = 0;
  std::vector<nn::EpochRecord> history;
};

/// Power and Q of the model the approximation sweep starts from: the biLSTM
/// (or first architecture) at its best validation power.
struct BaseModel {
  nn::Architecture architecture;
  double power_dbm = 0.0;
  nn::EqualizerModel model;
};
BaseModel select_base_model(const ExperimentConfig& cfg);

/// One approximation cell, with or without retraining. Completed cells are
/// read back instead of recomputed.
SweepCell cmd_retrain(const ExperimentConfig& cfg, const std::string& family, int level,
                      bool retrain, const LogFn& log = {});

/// Full grid (Taylor orders, PWL segment counts, LUT bit widths, each with
/// and without retraining, plus the unapproximated reference), run on
/// cfg.threads workers.
std::vector<SweepCell> cmd_sweep_approx(const ExperimentConfig& cfg, const LogFn& log = {});

struct QuantizeSummary {
  int frac_bits = 16;
  double float_q_db = 0.0;
  double fixed_q_db = 0.0;
  double max_abs_output_diff = 0.0;  // over the first test windows
};

/// int32 inference of the retrained PWL-3 model against its float version.
QuantizeSummary cmd_quantize(const ExperimentConfig& cfg, const LogFn& log = {});

/// Writes q_vs_power.csv, q_vs_approx.csv, complexity.csv and summary.txt
/// into <run>/report from whatever results exist.
std::vector<std::string> cmd_report(const ExperimentConfig& cfg, const std::string& tables_csv,
                                    const LogFn& log = {});

std::vector<SweepCell> read_cells(const ExperimentConfig& cfg);
std::vector<QPoint> read_qpoints(const std::string& csv_path);

/// Records a finished command in <run>/manifest.json.
void record_manifest(const ExperimentConfig& cfg, const std::string& command, Stage stage,
                     double wall_seconds);

}  // namespace fibereq::experiment
