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

#include <optional>
#include <string>

#include "fibereq/channel.hpp"
#include "fibereq/fixed_point.hpp"
#include "fibereq/train.hpp"

namespace fibereq {

inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kWeightsVersion = 1;

enum class Split { Train, Validation, Test };
std::string to_string(Split s);

/// Everything needed to regenerate a dataset, plus its split layout:
/// [guard, guard + train) is the training pool, followed directly by the
/// validation and test ranges.
struct DatasetMeta {
  FiberLinkParams link;
  double launch_power_dbm = 0.0;
  double symbol_rate_bd = 34e9;
  double rolloff = 0.1;
  int sps = 4;
  std::uint64_t bit_seed = 1;
  std::uint64_t ase_seed = 2;
  std::uint64_t noise_seed = 3;
  double noise_sigma = 0.0;  // transceiver noise std, normalized units
  std::size_t guard = 1024;
  std::size_t train = std::size_t{1} << 17;
  std::size_t validation = std::size_t{1} << 15;
  std::size_t test = std::size_t{1} << 15;

  std::pair<std::size_t, std::size_t> range(Split s) const;  // begin, count
  void validate(std::size_t n_symbols) const;
};

struct Dataset {
  DatasetMeta meta;
  SymbolBlock transmitted;
  /// CDC output after matched filtering, k_dsp normalization and transceiver
  /// noise (noise_sigma, noise_seed).
  SymbolBlock received;
  /// Link output before any DSP, kept for the DBP baseline.
  std::optional<SignalFrame> waveform;

  nn::SequenceData sequence(Split s) const;
};

/// Binary container: "FIBEREQD", u32 version, u64 header length, JSON header,
/// then little-endian payload (complex128 symbols, u8 bits, optional
/// complex128 waveform).
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);
/// Header only, without reading the payload.
DatasetMeta load_dataset_meta(const std::string& path);

/// Binary container: "FIBEREQW", u32 version, u64 header length, JSON header
/// (architecture, dims, activation specs, tensor names and shapes,
/// frac_bits when quantized), then the tensors in model order, column-major,
/// as little-endian float64 or int32.
void save_model(const std::string& path, const nn::EqualizerModel& model);
nn::EqualizerModel load_model(const std::string& path);
void save_fixed_model(const std::string& path, const fx::FixedPointModel& model);
fx::FixedPointModel load_fixed_model(const std::string& path);
/// True when the weight file holds int32 tensors.
bool is_fixed_model_file(const std::string& path);

/// Coefficient tables of one approximation as CSV:
///   taylor: function,order,boundary,power,coefficient
///   pwl:    function,lo,hi,slope,intercept
///   lut:    function,n_bits,x_min,x_max,level,value,grad
/// Values are written with round-trip precision.
std::string activation_to_csv(const act::ActivationSpec& spec);
act::ActivationSpec activation_from_csv(const std::string& path);

/// CDC taps as index,re,im.
std::string taps_to_csv(const CVec& taps);

/// Activation spec <-> JSON text, used by weight files and run manifests.
std::string activation_to_json(const act::ActivationSpec& spec);
act::ActivationSpec activation_from_json(const std::string& text);

}  // namespace fibereq
