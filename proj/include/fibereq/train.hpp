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

#include <cstdint>
#include <functional>
#include <vector>

#include "fibereq/channel.hpp"
#include "fibereq/model.hpp"

namespace fibereq::nn {

/// Equalizer input/target sequence: per symbol the received Re/Im of both
/// polarizations and the transmitted H-polarization symbol.
struct SequenceData {
  Mat features;  // 4 x N
  Mat targets;   // 2 x N
  Bits bits_h;   // 4 bits per symbol

  std::size_t size() const { return static_cast<std::size_t>(features.cols()); }
  SequenceData slice(std::size_t begin, std::size_t count) const;

  /// Symbols [begin, begin + count) of a received block paired with the
  /// transmitted block it was normalized against.
  static SequenceData from_blocks(const SymbolBlock& received, const SymbolBlock& transmitted,
                                  std::size_t begin, std::size_t count);
};

struct TrainConfig {
  int batch_size = 2001;            // windows per mini-batch
  double learning_rate = 5e-4;
  int max_epochs = 100;
  std::size_t symbols_per_epoch = std::size_t{1} << 18;
  std::uint64_t seed = 1;
  int patience = 0;                 // stop after this many epochs without improvement; 0 = off
  std::function<void(int epoch, double loss, double val_ber)> on_epoch;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_ber = 0.5;
  double val_q_db = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;  // epoch 0 is the initial model
  int best_epoch = 0;
  double best_val_ber = 0.5;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8).
template <typename Scalar>
class Adam {
 public:
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void reset(const std::vector<M>& params);
  bool initialized() const { return !m_.empty(); }
  long steps() const { return t_; }
  void step(std::vector<M>& params, const std::vector<M>& grads, double lr);

 private:
  std::vector<M> m_;
  std::vector<M> v_;
  long t_ = 0;
};

extern template class Adam<float>;
extern template class Adam<double>;

struct TrainResult {
  EqualizerModel model;
  TrainHistory history;
};

/// Mini-batch Adam on random windows of the training sequence with the
/// MSE loss; after every epoch the validation BER is measured and the
/// weights of the best epoch are returned. Training runs in single
/// precision. Throws NumericError when the loss becomes non-finite.
TrainResult train(const EqualizerModel& initial, const SequenceData& train_data,
                  const SequenceData& validation, const TrainConfig& cfg);

/// Replaces the activation bindings and fine-tunes from the given weights.
TrainResult retrain_with_approximation(const EqualizerModel& pretrained,
                                       const act::ActivationSet& activations,
                                       const SequenceData& train_data,
                                       const SequenceData& validation, const TrainConfig& cfg);

enum class Precision { Single, Double };

/// Sliding-window equalization with stride n_out. The output covers
/// positions [first, first + symbols.size()) of the sequence, each exactly
/// once, where first = offset().
struct Equalized {
  CVec symbols;
  std::size_t first = 0;
};

Equalized equalize(const EqualizerModel& model, const SequenceData& data,
                   Precision precision = Precision::Single);

/// BER of the H polarization over the covered positions.
double equalized_ber(const Equalized& eq, const SequenceData& data);
double evaluate_ber(const EqualizerModel& model, const SequenceData& data,
                    Precision precision = Precision::Single);

/// Grid search of a Taylor boundary with frozen weights: each candidate
/// replaces the binding for `which` (order from `order`) and the candidate
/// with the highest validation Q wins.
double grid_search_taylor_boundary(const EqualizerModel& model, const SequenceData& validation,
                                   act::Function which, int order,
                                   std::span<const double> candidates);

/// Gathers windows starting at `starts` into a time-major batch.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> gather_windows(
    const Mat& features, std::span<const std::size_t> starts, int window);

}  // namespace fibereq::nn
