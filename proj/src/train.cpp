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

#include "fibereq/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fibereq/metrics.hpp"

namespace fibereq::nn {

SequenceData SequenceData::slice(std::size_t begin, std::size_t count) const {
  require(begin + count <= size(), "slice exceeds the sequence");
  SequenceData s;
  const auto b = static_cast<Eigen::Index>(begin);
  const auto n = static_cast<Eigen::Index>(count);
  s.features = features.middleCols(b, n);
  s.targets = targets.middleCols(b, n);
  s.bits_h.assign(bits_h.begin() + static_cast<std::ptrdiff_t>(begin * kBitsPerSymbol),
                  bits_h.begin() + static_cast<std::ptrdiff_t>((begin + count) * kBitsPerSymbol));
  return s;
}

SequenceData SequenceData::from_blocks(const SymbolBlock& received,
                                       const SymbolBlock& transmitted, std::size_t begin,
                                       std::size_t count) {
  require(received.size() == transmitted.size(), "received and transmitted lengths differ");
  require(begin + count <= received.size(), "range exceeds the block");
  require(transmitted.bits_h.size() == transmitted.size() * kBitsPerSymbol,
          "transmitted block has no bits");
  SequenceData s;
  s.features.resize(4, static_cast<Eigen::Index>(count));
  s.targets.resize(2, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    const cplx rh = received.h[begin + i];
    const cplx rv = received.v[begin + i];
    s.features(0, j) = rh.real();
    s.features(1, j) = rh.imag();
    s.features(2, j) = rv.real();
    s.features(3, j) = rv.imag();
    s.targets(0, j) = transmitted.h[begin + i].real();
    s.targets(1, j) = transmitted.h[begin + i].imag();
  }
  s.bits_h.assign(transmitted.bits_h.begin() + static_cast<std::ptrdiff_t>(begin * kBitsPerSymbol),
                  transmitted.bits_h.begin() +
                      static_cast<std::ptrdiff_t>((begin + count) * kBitsPerSymbol));
  return s;
}

void TrainConfig::validate() const {
  require(batch_size > 0, "batch size must be positive");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
  require(max_epochs >= 0, "max_epochs must be >= 0");
  require(symbols_per_epoch > 0, "symbols_per_epoch must be positive");
  require(patience >= 0, "patience must be >= 0");
}

template <typename S>
void Adam<S>::reset(const std::vector<M>& params) {
  m_.clear();
  v_.clear();
  for (const auto& p : params) {
    m_.push_back(M::Zero(p.rows(), p.cols()));
    v_.push_back(M::Zero(p.rows(), p.cols()));
  }
  t_ = 0;
}

template <typename S>
void Adam<S>::step(std::vector<M>& params, const std::vector<M>& grads, double lr) {
  if (!initialized()) reset(params);
  require(params.size() == m_.size() && grads.size() == m_.size(), "optimizer state mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  const S b1 = static_cast<S>(beta1);
  const S b2 = static_cast<S>(beta2);
  const S step = static_cast<S>(lr / c1);
  const S root_c2 = static_cast<S>(std::sqrt(c2));
  const S e = static_cast<S>(eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (S(1) - b1) * grads[i];
    v_[i] = b2 * v_[i] + (S(1) - b2) * grads[i].cwiseAbs2();
    // lr * m_hat / (sqrt(v_hat) + eps) with v_hat = v / c2.
    params[i].array() -= step * m_[i].array() / (v_[i].array().sqrt() / root_c2 + e);
  }
}

template class Adam<float>;
template class Adam<double>;

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> gather_windows(
    const Mat& features, std::span<const std::size_t> starts, int window) {
  const auto B = static_cast<Eigen::Index>(starts.size());
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> x(features.rows(), window * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    require(starts[b] + static_cast<std::size_t>(window) <= static_cast<std::size_t>(features.cols()),
            "window exceeds the sequence");
    for (int t = 0; t < window; ++t) {
      x.col(t * B + b) = features.col(static_cast<Eigen::Index>(starts[b]) + t).template cast<S>();
    }
  }
  return x;
}

template Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic> gather_windows<float>(
    const Mat&, std::span<const std::size_t>, int);
template Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> gather_windows<double>(
    const Mat&, std::span<const std::size_t>, int);

namespace {

template <typename S>
Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> gather_targets(const Mat& targets,
                                                                 std::span<const std::size_t> starts,
                                                                 const ModelDims& d) {
  const auto B = static_cast<Eigen::Index>(starts.size());
  const int n_out = d.n_out();
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> y(targets.rows(), n_out * B);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (int t = 0; t < n_out; ++t) {
      y.col(t * B + b) =
          targets.col(static_cast<Eigen::Index>(starts[b]) + d.offset() + t).template cast<S>();
    }
  }
  return y;
}

template <typename S>
Equalized equalize_impl(Network<S>& net, const SequenceData& data) {
  const ModelDims& d = net.dims();
  require(data.features.rows() == d.features, "sequence feature count does not match the model");
  require(data.size() >= static_cast<std::size_t>(d.window), "sequence shorter than one window");
  const std::size_t n_out = static_cast<std::size_t>(d.n_out());
  const std::size_t n_windows = (data.size() - static_cast<std::size_t>(d.window)) / n_out + 1;
  Equalized eq;
  eq.first = static_cast<std::size_t>(d.offset());
  eq.symbols.resize(n_windows * n_out);
  constexpr std::size_t kChunk = 512;
  std::vector<std::size_t> starts;
  for (std::size_t w0 = 0; w0 < n_windows; w0 += kChunk) {
    const std::size_t nb = std::min(kChunk, n_windows - w0);
    starts.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) starts[b] = (w0 + b) * n_out;
    const auto x = gather_windows<S>(data.features, starts, d.window);
    const auto& y = net.forward(x, static_cast<int>(nb));
    for (std::size_t b = 0; b < nb; ++b) {
      for (std::size_t t = 0; t < n_out; ++t) {
        const auto col = static_cast<Eigen::Index>(t * nb + b);
        eq.symbols[(w0 + b) * n_out + t] =
            cplx{static_cast<double>(y(0, col)), static_cast<double>(y(1, col))};
      }
    }
  }
  return eq;
}

}  // namespace

Equalized equalize(const EqualizerModel& model, const SequenceData& data, Precision precision) {
  if (precision == Precision::Double) {
    Network<double> net(model);
    return equalize_impl(net, data);
  }
  Network<float> net(model);
  return equalize_impl(net, data);
}

double equalized_ber(const Equalized& eq, const SequenceData& data) {
  require(eq.first + eq.symbols.size() <= data.size(), "equalized range exceeds the sequence");
  const std::span<const std::uint8_t> bits(data.bits_h);
  return ber(eq.symbols, bits.subspan(eq.first * kBitsPerSymbol, eq.symbols.size() * kBitsPerSymbol));
}

double evaluate_ber(const EqualizerModel& model, const SequenceData& data, Precision precision) {
  return equalized_ber(equalize(model, data, precision), data);
}

TrainResult train(const EqualizerModel& initial, const SequenceData& train_data,
                  const SequenceData& validation, const TrainConfig& cfg) {
  cfg.validate();
  initial.validate();
  const ModelDims& d = initial.dims;
  require(train_data.size() >= static_cast<std::size_t>(d.window), "training sequence too short");

  TrainResult result{initial, {}};
  Network<float> net(initial);
  Adam<float> adam;
  adam.reset(net.params());

  auto record = [&](int epoch, double train_loss) {
    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = train_loss;
    r.val_ber = equalized_ber(equalize_impl(net, validation), validation);
    r.val_q_db = q_factor(r.val_ber);
    result.history.epochs.push_back(r);
    if (cfg.on_epoch) cfg.on_epoch(epoch, train_loss, r.val_ber);
    return r.val_ber;
  };

  result.history.best_val_ber = record(0, std::nan(""));
  result.history.best_epoch = 0;

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, train_data.size() - d.window);
  const std::size_t n_out = static_cast<std::size_t>(d.n_out());
  const std::size_t windows_per_epoch = (cfg.symbols_per_epoch + n_out - 1) / n_out;
  std::vector<std::size_t> starts;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t done = 0; done < windows_per_epoch;) {
      const std::size_t nb =
          std::min(static_cast<std::size_t>(cfg.batch_size), windows_per_epoch - done);
      starts.resize(nb);
      for (auto& s : starts) s = pick(rng);
      const auto x = gather_windows<float>(train_data.features, starts, d.window);
      const auto target = gather_targets<float>(train_data.targets, starts, d);
      const auto& y = net.forward(x, static_cast<int>(nb));
      const Eigen::MatrixXf diff = y - target;
      const double l = static_cast<double>(diff.squaredNorm()) / static_cast<double>(diff.size());
      if (!std::isfinite(l)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           " (loss is not finite); lower the learning rate");
      }
      net.backward((2.0f / static_cast<float>(diff.size())) * diff);
      adam.step(net.params(), net.grads(), cfg.learning_rate);
      loss_sum += l * static_cast<double>(nb);
      loss_count += nb;
      done += nb;
    }
    const double val_ber = record(epoch, loss_sum / static_cast<double>(loss_count));
    if (val_ber < result.history.best_val_ber) {
      result.history.best_val_ber = val_ber;
      result.history.best_epoch = epoch;
      net.store(result.model);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

TrainResult retrain_with_approximation(const EqualizerModel& pretrained,
                                       const act::ActivationSet& activations,
                                       const SequenceData& train_data,
                                       const SequenceData& validation, const TrainConfig& cfg) {
  EqualizerModel m = pretrained;
  m.activations = activations;
  return train(m, train_data, validation, cfg);
}

double grid_search_taylor_boundary(const EqualizerModel& model, const SequenceData& validation,
                                   act::Function which, int order,
                                   std::span<const double> candidates) {
  return act::grid_search_boundary(candidates, [&](double a) {
    EqualizerModel m = model;
    if (which == act::Function::Tanh) {
      m.activations.tanh = act::make_taylor(which, order, a);
    } else {
      m.activations.sigmoid = act::make_taylor(which, order, a);
    }
    return q_factor(evaluate_ber(m, validation));
  });
}

}  // namespace fibereq::nn
