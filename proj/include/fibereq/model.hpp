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
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fibereq/activations.hpp"

namespace fibereq::nn {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Architecture { BiLstmCnn, DeepCnn };
std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

/// Layer sizes. The defaults are the reference configuration: 81-symbol
/// windows of 4 features, 35 hidden units (or filters), an 11-tap hidden
/// kernel for the deep CNN, and a 21-tap output convolution giving 61
/// recovered symbols with 2 outputs (Re/Im of the H polarization).
struct ModelDims {
  int features = 4;
  int window = 81;
  int hidden = 35;
  int hidden_kernel = 11;
  int out_kernel = 21;
  int outputs = 2;

  int n_out() const { return window - out_kernel + 1; }
  /// Index inside the window of the first recovered symbol.
  int offset() const { return (out_kernel - 1) / 2; }
  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

/// Trainable tensors plus activation bindings.
///
/// Tensor order for BiLstmCnn: fwd.W (4h x F), fwd.U (4h x h), fwd.b (4h),
/// bwd.W, bwd.U, bwd.b, out.K (2 x 21*2h), out.b (2). Gate rows are stacked
/// as input, forget, output, candidate.
/// Tensor order for DeepCnn: c1.K (h x 11*F), c1.b, c2.K (h x 11*h), c2.b,
/// out.K, out.b.
/// Convolution kernels are stored as C_out x (K * C_in) with column
/// k * C_in + c holding tap k of input channel c.
struct EqualizerModel {
  Architecture architecture = Architecture::BiLstmCnn;
  ModelDims dims;
  act::ActivationSet activations;
  std::vector<Mat> tensors;

  /// Glorot-uniform weights, zero biases (forget-gate bias 1), seeded.
  static EqualizerModel create(Architecture arch, const ModelDims& dims, std::uint64_t seed);
  static EqualizerModel zeros(Architecture arch, const ModelDims& dims);

  std::vector<std::string> tensor_names() const;
  std::vector<std::pair<int, int>> tensor_shapes() const;
  std::size_t parameter_count() const;
  void validate() const;
};

std::vector<std::pair<int, int>> tensor_shapes(Architecture arch, const ModelDims& dims);

struct LstmParams {
  Mat w;  // 4h x n_in
  Mat u;  // 4h x h
  Vec b;  // 4h
  act::ActivationSpec sigma = act::make_exact(act::Function::Sigmoid);
  act::ActivationSpec phi = act::make_exact(act::Function::Tanh);

  int hidden() const { return static_cast<int>(u.cols()); }
  int inputs() const { return static_cast<int>(w.cols()); }
};

struct LstmState {
  Vec h;
  Vec c;
};

/// One LSTM step:
///   i = sigma(W_i x + U_i h + b_i), f = sigma(...), o = sigma(...),
///   g = phi(W_c x + U_c h + b_c), c' = f*c + i*g, h' = o*phi(c').
LstmState lstm_cell_step(const LstmParams& p, const Vec& x, const LstmState& state);

/// Sequence T x F to T x 2h: forward direction in the first h columns,
/// backward direction (run right to left) in the last h.
Mat bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Mat& sequence);

enum class Padding { Same, None };

/// Cross-correlation of a T x C_in input with C_out x (K * C_in) kernels.
/// Same padding keeps T rows (zeros outside), None gives T - K + 1.
Mat conv1d(const Mat& input, const Mat& kernels, const Vec& bias, int kernel_size, Padding pad);

/// Window (window x features) to recovered symbols (n_out x outputs).
Mat forward(const EqualizerModel& model, const Mat& window);

struct Gradients {
  std::vector<Mat> tensors;
  double loss = 0.0;
};

/// Mean squared error against target (n_out x outputs) and its gradient
/// for every tensor, in tensor order.
Gradients backward(const EqualizerModel& model, const Mat& window, const Mat& target);
double loss(const EqualizerModel& model, const Mat& window, const Mat& target);

/// Straight-line evaluation with explicit loops that counts every real
/// multiplication (LSTM gate products and element-wise products,
/// convolution taps including zero-padded ones). Activation evaluation is
/// not counted.
Mat reference_forward(const EqualizerModel& model, const Mat& window,
                      std::uint64_t* multiplies = nullptr);

struct LayerCount {
  std::string layer;
  std::uint64_t per_window = 0;
};

struct MultiplierCount {
  std::vector<LayerCount> layers;
  std::uint64_t per_window = 0;
  double per_symbol = 0.0;  // per_window / n_out
};

/// Closed-form real-multiplier counts from the layer dimensions:
/// LSTM 4h(n_in + h) + 3h per step and direction, convolution
/// C_out * C_in * K per output position.
MultiplierCount count_real_multipliers(const EqualizerModel& model);

/// Batched evaluation and backpropagation in Scalar precision.
///
/// Batches are time-major: a features x (T * B) matrix whose column
/// t * B + b holds time step t of window b. Outputs use the same layout
/// with n_out time steps.
template <typename Scalar>
class Network {
 public:
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  explicit Network(const EqualizerModel& model);

  void load(const EqualizerModel& model);
  void store(EqualizerModel& model) const;
  void set_activations(const act::ActivationSet& a) { act_ = a; }

  const M& forward(const M& x, int batch);
  /// Gradient of the loss with respect to the last forward output; fills
  /// grads() (overwriting).
  void backward(const M& dy);

  std::vector<M>& params() { return params_; }
  const std::vector<M>& params() const { return params_; }
  const std::vector<M>& grads() const { return grads_; }
  const ModelDims& dims() const { return dims_; }
  Architecture architecture() const { return arch_; }

 private:
  struct LstmCache {
    M pre;    // 4h x TB gate pre-activations
    M gate;   // 4h x TB activated gates
    M cell;   // h x TB
    M cell_act;  // h x TB, phi(cell)
  };

  void lstm_forward(int dir, int batch);
  void lstm_backward(int dir, int batch, const M& dh_all);
  void conv_forward(const M& in, const M& k, const M& b, int ksize, Padding pad, int t_in,
                    int batch, M& out) const;
  void conv_backward(const M& in, const M& k, const M& dout, int ksize, Padding pad, int t_in,
                     int batch, M& dk, M& db, M* din) const;

  Architecture arch_;
  ModelDims dims_;
  act::ActivationSet act_;
  std::vector<M> params_;
  std::vector<M> grads_;
  int batch_ = 0;
  M x_;
  M y_;
  M hidden_;  // biLSTM: 2h x TB concatenated states; deep CNN: second layer output
  LstmCache lstm_[2];
  M pre1_, act1_, pre2_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace fibereq::nn
