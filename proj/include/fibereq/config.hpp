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

#include <string>
#include <vector>

#include "fibereq/channel.hpp"
#include "fibereq/model.hpp"
#include "fibereq/train.hpp"

namespace fibereq {

struct SignalConfig {
  double symbol_rate_bd = 34e9;
  double rolloff = 0.1;
  int sps = 4;
  int log2_symbols = 18;
  int cdc_taps = 517;
};

/// Transceiver noise added after CDC and normalization, at a fixed absolute
/// level: sigma(p) = sigma_0dbm * 10^(-p/20) in normalized units. When
/// target_cdc_peak_q_db is positive, sigma_0dbm is calibrated so that the
/// best CDC Q over the power sweep equals the target.
struct NoiseConfig {
  double target_cdc_peak_q_db = 3.91;
  double sigma_0dbm = 0.0;
};

struct SplitConfig {
  std::size_t guard = 1024;
  std::size_t train = std::size_t{1} << 17;
  std::size_t validation = std::size_t{1} << 15;
  std::size_t test = std::size_t{1} << 15;
};

struct SeedConfig {
  std::uint64_t bits = 42;
  std::uint64_t ase = 7;
  std::uint64_t noise = 11;
  std::uint64_t init = 5;
  std::uint64_t train = 3;
};

struct DbpSettings {
  int steps_per_span = 1;
  double sps = 2.3;
  double xi_min = 0.0;
  double xi_max = 1.5;
  double xi_step = 0.1;
  std::vector<double> xi_grid() const;
};

/// Desk-scale budget: 32-window batches, 2^15 symbols per epoch, at most
/// 2000 epochs at the anchor power.
inline nn::TrainConfig desk_train_config() {
  nn::TrainConfig c;
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.max_epochs = 2000;
  c.symbols_per_epoch = std::size_t{1} << 15;
  return c;
}

struct TrainingPlan {
  nn::TrainConfig train = desk_train_config();
  double anchor_power_dbm = 2.0;  // trained from scratch; others warm-start outward
  int warm_start_epochs = 300;
};

struct SweepConfig {
  std::vector<int> taylor_orders{3, 5, 7, 9};
  std::vector<int> pwl_segments{3, 5, 7, 9};
  std::vector<int> lut_bits{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  int retrain_epochs = 150;
  double retrain_learning_rate = 5e-4;
  bool search_taylor_boundary = true;
};

struct ExperimentConfig {
  FiberLinkParams link;
  SignalConfig signal;
  NoiseConfig noise;
  SplitConfig split;
  SeedConfig seeds;
  std::vector<double> powers_dbm{-4, -3, -2, -1, 0, 1, 2, 3, 4};
  std::vector<nn::Architecture> architectures{nn::Architecture::BiLstmCnn,
                                              nn::Architecture::DeepCnn};
  nn::ModelDims dims;
  TrainingPlan training;
  SweepConfig sweep;
  DbpSettings dbp;
  int frac_bits = 16;
  std::string output_dir = "run";
  int threads = 1;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// Flat INI text with one section per module ([link], [signal], [noise],
/// [split], [seeds], [experiment], [model], [train], [sweep], [dbp],
/// [quantize]). Unknown sections or keys are rejected. Lists are
/// comma-separated.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// FIBEREQ_OUTPUT_DIR and FIBEREQ_THREADS override the file values.
void apply_env_overrides(ExperimentConfig& cfg);

/// FNV-1a 64 of the serialized sections that define the given stage.
enum class Stage { Data, Baselines, Train, Sweep, Quantize };
std::string config_hash(const ExperimentConfig& cfg, Stage stage);

}  // namespace fibereq
