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

#include "fibereq/model.hpp"

#include <cmath>
#include <random>

namespace fibereq::nn {

std::string to_string(Architecture a) {
  return a == Architecture::BiLstmCnn ? "bilstm-cnn" : "deep-cnn";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "bilstm-cnn") return Architecture::BiLstmCnn;
  if (s == "deep-cnn") return Architecture::DeepCnn;
  throw InvalidArgument("unknown architecture: " + s);
}

void ModelDims::validate() const {
  require(features > 0 && hidden > 0 && outputs > 0, "layer sizes must be positive");
  require(out_kernel >= 1 && out_kernel % 2 == 1, "output kernel size must be odd");
  require(hidden_kernel >= 1 && hidden_kernel % 2 == 1, "hidden kernel size must be odd");
  require(window >= out_kernel, "window is shorter than the output kernel");
}

std::vector<std::pair<int, int>> tensor_shapes(Architecture arch, const ModelDims& d) {
  const int h = d.hidden;
  if (arch == Architecture::BiLstmCnn) {
    return {{4 * h, d.features}, {4 * h, h}, {4 * h, 1}, {4 * h, d.features}, {4 * h, h},
            {4 * h, 1},          {d.outputs, d.out_kernel * 2 * h}, {d.outputs, 1}};
  }
  return {{h, d.hidden_kernel * d.features}, {h, 1}, {h, d.hidden_kernel * h}, {h, 1},
          {d.outputs, d.out_kernel * h},      {d.outputs, 1}};
}

std::vector<std::pair<int, int>> EqualizerModel::tensor_shapes() const {
  return nn::tensor_shapes(architecture, dims);
}

std::vector<std::string> EqualizerModel::tensor_names() const {
  if (architecture == Architecture::BiLstmCnn) {
    return {"fwd.W", "fwd.U", "fwd.b", "bwd.W", "bwd.U", "bwd.b", "out.K", "out.b"};
  }
  return {"c1.K", "c1.b", "c2.K", "c2.b", "out.K", "out.b"};
}

std::size_t EqualizerModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

void EqualizerModel::validate() const {
  dims.validate();
  activations.tanh.validate();
  activations.sigmoid.validate();
  require(activations.tanh.function == act::Function::Tanh &&
              activations.sigmoid.function == act::Function::Sigmoid,
          "activation bindings are swapped");
  const auto shapes = tensor_shapes();
  require(tensors.size() == shapes.size(), "tensor count does not match the architecture");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    require(tensors[i].rows() == shapes[i].first && tensors[i].cols() == shapes[i].second,
            "tensor " + tensor_names()[i] + " has the wrong shape");
  }
}

EqualizerModel EqualizerModel::zeros(Architecture arch, const ModelDims& dims) {
  dims.validate();
  EqualizerModel m;
  m.architecture = arch;
  m.dims = dims;
  for (auto [r, c] : nn::tensor_shapes(arch, dims)) m.tensors.push_back(Mat::Zero(r, c));
  return m;
}

EqualizerModel EqualizerModel::create(Architecture arch, const ModelDims& dims,
                                      std::uint64_t seed) {
  EqualizerModel m = zeros(arch, dims);
  std::mt19937_64 rng(seed);
  auto glorot = [&](Mat& w, int fan_in, int fan_out) {
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-lim, lim);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
  };
  const int h = dims.hidden;
  if (arch == Architecture::BiLstmCnn) {
    for (int dir = 0; dir < 2; ++dir) {
      glorot(m.tensors[3 * dir], dims.features, 4 * h);
      glorot(m.tensors[3 * dir + 1], h, 4 * h);
      m.tensors[3 * dir + 2].middleRows(h, h).setOnes();
    }
    glorot(m.tensors[6], 2 * h * dims.out_kernel, dims.outputs * dims.out_kernel);
  } else {
    glorot(m.tensors[0], dims.features * dims.hidden_kernel, h * dims.hidden_kernel);
    glorot(m.tensors[2], h * dims.hidden_kernel, h * dims.hidden_kernel);
    glorot(m.tensors[4], h * dims.out_kernel, dims.outputs * dims.out_kernel);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Single-sequence operations.

LstmState lstm_cell_step(const LstmParams& p, const Vec& x, const LstmState& state) {
  const int h = p.hidden();
  require(p.w.rows() == 4 * h && p.u.rows() == 4 * h && p.b.size() == 4 * h,
          "LSTM gate dimensions do not match");
  require(x.size() == p.w.cols(), "LSTM input size mismatch");
  require(state.h.size() == h && state.c.size() == h, "LSTM state size mismatch");
  Vec a = p.w * x + p.u * state.h + p.b;
  Vec g(4 * h);
  act::eval_n(p.sigma, a.data(), g.data(), static_cast<std::size_t>(3 * h));
  act::eval_n(p.phi, a.data() + 3 * h, g.data() + 3 * h, static_cast<std::size_t>(h));
  LstmState out;
  out.c = g.segment(h, h).cwiseProduct(state.c) + g.head(h).cwiseProduct(g.tail(h));
  Vec tc(h);
  act::eval_n(p.phi, out.c.data(), tc.data(), static_cast<std::size_t>(h));
  out.h = g.segment(2 * h, h).cwiseProduct(tc);
  return out;
}

Mat bilstm_forward(const LstmParams& fwd, const LstmParams& bwd, const Mat& sequence) {
  require(fwd.inputs() == sequence.cols() && bwd.inputs() == sequence.cols(),
          "sequence feature count does not match the LSTM input size");
  require(fwd.hidden() == bwd.hidden(), "both directions need the same hidden size");
  const int h = fwd.hidden();
  const auto T = sequence.rows();
  Mat out(T, 2 * h);
  LstmState s{Vec::Zero(h), Vec::Zero(h)};
  for (Eigen::Index t = 0; t < T; ++t) {
    s = lstm_cell_step(fwd, sequence.row(t).transpose(), s);
    out.row(t).head(h) = s.h.transpose();
  }
  s = LstmState{Vec::Zero(h), Vec::Zero(h)};
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    s = lstm_cell_step(bwd, sequence.row(t).transpose(), s);
    out.row(t).tail(h) = s.h.transpose();
  }
  return out;
}

Mat conv1d(const Mat& input, const Mat& kernels, const Vec& bias, int kernel_size, Padding pad) {
  require(kernel_size >= 1 && kernel_size % 2 == 1, "kernel size must be odd");
  const auto T = input.rows();
  const auto cin = input.cols();
  const auto cout = kernels.rows();
  require(kernels.cols() == kernel_size * cin, "kernel shape does not match the input channels");
  require(bias.size() == cout, "bias size does not match the output channels");
  if (pad == Padding::None) require(kernel_size <= T, "kernel longer than the input");
  const Eigen::Index t_out = pad == Padding::Same ? T : T - kernel_size + 1;
  const int shift0 = pad == Padding::Same ? -(kernel_size / 2) : 0;
  Mat out(t_out, cout);
  for (Eigen::Index t = 0; t < t_out; ++t) {
    Vec acc = bias;
    for (int k = 0; k < kernel_size; ++k) {
      const Eigen::Index src = t + k + shift0;
      if (src < 0 || src >= T) continue;
      acc.noalias() += kernels.middleCols(k * cin, cin) * input.row(src).transpose();
    }
    out.row(t) = acc.transpose();
  }
  return out;
}

Mat forward(const EqualizerModel& model, const Mat& window) {
  require(window.rows() == model.dims.window && window.cols() == model.dims.features,
          "window shape does not match the model");
  Network<double> net(model);
  const Mat y = net.forward(window.transpose(), 1);
  return y.transpose();
}

Gradients backward(const EqualizerModel& model, const Mat& window, const Mat& target) {
  require(window.rows() == model.dims.window && window.cols() == model.dims.features,
          "window shape does not match the model");
  require(target.rows() == model.dims.n_out() && target.cols() == model.dims.outputs,
          "target shape does not match the model");
  Network<double> net(model);
  const Mat y = net.forward(window.transpose(), 1);
  const Mat diff = y - target.transpose();
  const double n = static_cast<double>(diff.size());
  Gradients g;
  g.loss = diff.squaredNorm() / n;
  net.backward(2.0 / n * diff);
  for (const auto& t : net.grads()) g.tensors.push_back(t);
  return g;
}

double loss(const EqualizerModel& model, const Mat& window, const Mat& target) {
  const Mat y = forward(model, window);
  return (y - target).squaredNorm() / static_cast<double>(y.size());
}

// ---------------------------------------------------------------------------
// Reference evaluation with a multiplication counter.

namespace {

struct Counter {
  std::uint64_t n = 0;
  double operator()(double a, double b) {
    ++n;
    return a * b;
  }
};

Mat ref_conv(const Mat& in, const Mat& k, const Mat& b, int ksize, Padding pad, Counter& mul) {
  const auto T = in.rows();
  const auto cin = in.cols();
  const auto cout = k.rows();
  const Eigen::Index t_out = pad == Padding::Same ? T : T - ksize + 1;
  const Eigen::Index shift = pad == Padding::Same ? -(ksize / 2) : 0;
  Mat out(t_out, cout);
  for (Eigen::Index t = 0; t < t_out; ++t) {
    for (Eigen::Index o = 0; o < cout; ++o) {
      double acc = b(o, 0);
      for (int kk = 0; kk < ksize; ++kk) {
        const Eigen::Index src = t + kk + shift;
        for (Eigen::Index c = 0; c < cin; ++c) {
          const double v = (src >= 0 && src < T) ? in(src, c) : 0.0;
          acc += mul(k(o, kk * cin + c), v);
        }
      }
      out(t, o) = acc;
    }
  }
  return out;
}

}  // namespace

Mat reference_forward(const EqualizerModel& model, const Mat& window, std::uint64_t* multiplies) {
  model.validate();
  const ModelDims& d = model.dims;
  require(window.rows() == d.window && window.cols() == d.features,
          "window shape does not match the model");
  Counter mul;
  const auto& sig = model.activations.sigmoid;
  const auto& tnh = model.activations.tanh;
  Mat out;
  if (model.architecture == Architecture::BiLstmCnn) {
    const int h = d.hidden;
    Mat states(d.window, 2 * h);
    for (int dir = 0; dir < 2; ++dir) {
      const Mat& W = model.tensors[3 * dir];
      const Mat& U = model.tensors[3 * dir + 1];
      const Mat& b = model.tensors[3 * dir + 2];
      std::vector<double> hp(h, 0.0), cp(h, 0.0), a(4 * h);
      for (int s = 0; s < d.window; ++s) {
        const int t = dir == 0 ? s : d.window - 1 - s;
        for (int r = 0; r < 4 * h; ++r) {
          double acc = b(r, 0);
          for (int j = 0; j < d.features; ++j) acc += mul(W(r, j), window(t, j));
          for (int j = 0; j < h; ++j) acc += mul(U(r, j), hp[j]);
          a[r] = acc;
        }
        for (int j = 0; j < h; ++j) {
          const double ig = act::eval(sig, a[j]);
          const double fg = act::eval(sig, a[h + j]);
          const double og = act::eval(sig, a[2 * h + j]);
          const double cand = act::eval(tnh, a[3 * h + j]);
          cp[j] = mul(fg, cp[j]) + mul(ig, cand);
          hp[j] = mul(og, act::eval(tnh, cp[j]));
          states(t, dir * h + j) = hp[j];
        }
      }
    }
    out = ref_conv(states, model.tensors[6], model.tensors[7], d.out_kernel, Padding::None, mul);
  } else {
    Mat a1 = ref_conv(window, model.tensors[0], model.tensors[1], d.hidden_kernel, Padding::Same,
                      mul);
    for (Eigen::Index i = 0; i < a1.size(); ++i) a1.data()[i] = act::eval(tnh, a1.data()[i]);
    Mat a2 = ref_conv(a1, model.tensors[2], model.tensors[3], d.hidden_kernel, Padding::Same, mul);
    for (Eigen::Index i = 0; i < a2.size(); ++i) a2.data()[i] = act::eval(tnh, a2.data()[i]);
    out = ref_conv(a2, model.tensors[4], model.tensors[5], d.out_kernel, Padding::None, mul);
  }
  if (multiplies != nullptr) *multiplies = mul.n;
  return out;
}

MultiplierCount count_real_multipliers(const EqualizerModel& model) {
  model.validate();
  const ModelDims& d = model.dims;
  const std::uint64_t T = static_cast<std::uint64_t>(d.window);
  const std::uint64_t h = static_cast<std::uint64_t>(d.hidden);
  const std::uint64_t F = static_cast<std::uint64_t>(d.features);
  const std::uint64_t n_out = static_cast<std::uint64_t>(d.n_out());
  MultiplierCount c;
  if (model.architecture == Architecture::BiLstmCnn) {
    const std::uint64_t per_step = 4 * h * (F + h) + 3 * h;
    c.layers.push_back({"bilstm.fwd", T * per_step});
    c.layers.push_back({"bilstm.bwd", T * per_step});
    c.layers.push_back({"out", n_out * static_cast<std::uint64_t>(d.outputs) * 2 * h *
                                   static_cast<std::uint64_t>(d.out_kernel)});
  } else {
    const std::uint64_t k = static_cast<std::uint64_t>(d.hidden_kernel);
    c.layers.push_back({"conv1", T * h * F * k});
    c.layers.push_back({"conv2", T * h * h * k});
    c.layers.push_back({"out", n_out * static_cast<std::uint64_t>(d.outputs) * h *
                                   static_cast<std::uint64_t>(d.out_kernel)});
  }
  for (const auto& l : c.layers) c.per_window += l.per_window;
  c.per_symbol = static_cast<double>(c.per_window) / static_cast<double>(n_out);
  return c;
}

// ---------------------------------------------------------------------------
// Batched network.

template <typename S>
Network<S>::Network(const EqualizerModel& model) {
  load(model);
}

template <typename S>
void Network<S>::load(const EqualizerModel& model) {
  model.validate();
  arch_ = model.architecture;
  dims_ = model.dims;
  act_ = model.activations;
  params_.clear();
  grads_.clear();
  for (const auto& t : model.tensors) {
    params_.push_back(t.template cast<S>());
    grads_.push_back(M::Zero(t.rows(), t.cols()));
  }
}

template <typename S>
void Network<S>::store(EqualizerModel& model) const {
  require(model.tensors.size() == params_.size(), "model does not match the network");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    model.tensors[i] = params_[i].template cast<double>();
  }
}

template <typename S>
void Network<S>::conv_forward(const M& in, const M& k, const M& b, int ksize, Padding pad,
                              int t_in, int batch, M& out) const {
  const auto cin = in.rows();
  const int t_out = pad == Padding::Same ? t_in : t_in - ksize + 1;
  out = b.col(0).replicate(1, static_cast<Eigen::Index>(t_out) * batch);
  const int half = ksize / 2;
  for (int kk = 0; kk < ksize; ++kk) {
    const auto kmat = k.middleCols(kk * cin, cin);
    if (pad == Padding::None) {
      out.noalias() += kmat * in.middleCols(static_cast<Eigen::Index>(kk) * batch,
                                            static_cast<Eigen::Index>(t_out) * batch);
    } else {
      const int s = kk - half;
      const int t0 = std::max(0, -s);
      const int t1 = std::min(t_in, t_in - s);
      if (t1 <= t0) continue;
      const Eigen::Index n = static_cast<Eigen::Index>(t1 - t0) * batch;
      out.middleCols(static_cast<Eigen::Index>(t0) * batch, n).noalias() +=
          kmat * in.middleCols(static_cast<Eigen::Index>(t0 + s) * batch, n);
    }
  }
}

template <typename S>
void Network<S>::conv_backward(const M& in, const M& k, const M& dout, int ksize, Padding pad,
                               int t_in, int batch, M& dk, M& db, M* din) const {
  const auto cin = in.rows();
  const int t_out = pad == Padding::Same ? t_in : t_in - ksize + 1;
  dk.setZero(k.rows(), k.cols());
  db = dout.rowwise().sum();
  if (din != nullptr) din->setZero(cin, static_cast<Eigen::Index>(t_in) * batch);
  const int half = ksize / 2;
  for (int kk = 0; kk < ksize; ++kk) {
    const auto kmat = k.middleCols(kk * cin, cin);
    int t0 = 0;
    int s = kk;
    int n_t = t_out;
    if (pad == Padding::Same) {
      s = kk - half;
      t0 = std::max(0, -s);
      n_t = std::min(t_in, t_in - s) - t0;
      if (n_t <= 0) continue;
    }
    const Eigen::Index n = static_cast<Eigen::Index>(n_t) * batch;
    const auto dblock = dout.middleCols(static_cast<Eigen::Index>(t0) * batch, n);
    const auto iblock = in.middleCols(static_cast<Eigen::Index>(t0 + s) * batch, n);
    dk.middleCols(kk * cin, cin).noalias() += dblock * iblock.transpose();
    if (din != nullptr) {
      din->middleCols(static_cast<Eigen::Index>(t0 + s) * batch, n).noalias() +=
          kmat.transpose() * dblock;
    }
  }
}

template <typename S>
void Network<S>::lstm_forward(int dir, int batch) {
  const int h = dims_.hidden;
  const int T = dims_.window;
  const M& W = params_[3 * dir];
  const M& U = params_[3 * dir + 1];
  const M& b = params_[3 * dir + 2];
  LstmCache& c = lstm_[dir];
  const Eigen::Index cols = static_cast<Eigen::Index>(T) * batch;
  c.pre.noalias() = W * x_;
  c.pre.colwise() += b.col(0);
  c.gate.resize(4 * h, cols);
  c.cell.resize(h, cols);
  c.cell_act.resize(h, cols);
  const auto n3 = static_cast<std::size_t>(3 * h);
  const auto n1 = static_cast<std::size_t>(h);
  for (int s = 0; s < T; ++s) {
    const int t = dir == 0 ? s : T - 1 - s;
    const int tp = dir == 0 ? t - 1 : t + 1;
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * batch;
    const Eigen::Index cp = static_cast<Eigen::Index>(tp) * batch;
    if (s > 0) c.pre.middleCols(c0, batch).noalias() += U * hidden_.block(dir * h, cp, h, batch);
    for (int j = 0; j < batch; ++j) {
      const S* p = c.pre.col(c0 + j).data();
      S* g = c.gate.col(c0 + j).data();
      act::eval_n(act_.sigmoid, p, g, n3);
      act::eval_n(act_.tanh, p + 3 * h, g + 3 * h, n1);
    }
    const auto gate = c.gate.middleCols(c0, batch);
    auto cell = c.cell.middleCols(c0, batch);
    if (s > 0) {
      cell = gate.middleRows(h, h).cwiseProduct(c.cell.middleCols(cp, batch)) +
             gate.topRows(h).cwiseProduct(gate.bottomRows(h));
    } else {
      cell = gate.topRows(h).cwiseProduct(gate.bottomRows(h));
    }
    act::eval_n(act_.tanh, c.cell.col(c0).data(), c.cell_act.col(c0).data(), n1 * batch);
    hidden_.block(dir * h, c0, h, batch) =
        gate.middleRows(2 * h, h).cwiseProduct(c.cell_act.middleCols(c0, batch));
  }
}

template <typename S>
void Network<S>::lstm_backward(int dir, int batch, const M& dh_all) {
  const int h = dims_.hidden;
  const int T = dims_.window;
  const M& U = params_[3 * dir + 1];
  LstmCache& c = lstm_[dir];
  const Eigen::Index cols = static_cast<Eigen::Index>(T) * batch;
  M dpre(4 * h, cols);
  M& dU = grads_[3 * dir + 1];
  dU.setZero(U.rows(), U.cols());

  // Activation derivatives with respect to the stored pre-activations.
  M dgate(4 * h, cols);
  M dcell_act(h, cols);
  const bool exact_sig = act_.sigmoid.kind() == act::Kind::Exact;
  const bool exact_tanh = act_.tanh.kind() == act::Kind::Exact;
  if (exact_sig) {
    dgate.topRows(3 * h) = c.gate.topRows(3 * h).cwiseProduct(
        (M::Ones(3 * h, cols) - c.gate.topRows(3 * h)));
  }
  if (exact_tanh) {
    dgate.bottomRows(h) = (M::Ones(h, cols) - c.gate.bottomRows(h).cwiseAbs2());
    dcell_act = M::Ones(h, cols) - c.cell_act.cwiseAbs2();
  } else {
    act::grad_n(act_.tanh, c.cell.data(), dcell_act.data(), static_cast<std::size_t>(h) * cols);
  }
  if (!exact_sig || !exact_tanh) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const S* p = c.pre.col(j).data();
      S* g = dgate.col(j).data();
      if (!exact_sig) act::grad_n(act_.sigmoid, p, g, static_cast<std::size_t>(3 * h));
      if (!exact_tanh) act::grad_n(act_.tanh, p + 3 * h, g + 3 * h, static_cast<std::size_t>(h));
    }
  }

  M dh_next = M::Zero(h, batch);
  M dc_next = M::Zero(h, batch);
  M dc(h, batch);
  for (int s = T - 1; s >= 0; --s) {
    const int t = dir == 0 ? s : T - 1 - s;
    const int tp = dir == 0 ? t - 1 : t + 1;
    const Eigen::Index c0 = static_cast<Eigen::Index>(t) * batch;
    const Eigen::Index cp = static_cast<Eigen::Index>(tp) * batch;
    const auto gate = c.gate.middleCols(c0, batch);
    const auto dg = dgate.middleCols(c0, batch);
    const M dh = dh_all.block(dir * h, c0, h, batch) + dh_next;
    dc = dh.cwiseProduct(gate.middleRows(2 * h, h))
             .cwiseProduct(dcell_act.middleCols(c0, batch)) +
         dc_next;
    auto da = dpre.middleCols(c0, batch);
    da.topRows(h) = dc.cwiseProduct(gate.bottomRows(h)).cwiseProduct(dg.topRows(h));
    if (s > 0) {
      da.middleRows(h, h) =
          dc.cwiseProduct(c.cell.middleCols(cp, batch)).cwiseProduct(dg.middleRows(h, h));
    } else {
      da.middleRows(h, h).setZero();
    }
    da.middleRows(2 * h, h) = dh.cwiseProduct(c.cell_act.middleCols(c0, batch))
                                  .cwiseProduct(dg.middleRows(2 * h, h));
    da.bottomRows(h) = dc.cwiseProduct(gate.topRows(h)).cwiseProduct(dg.bottomRows(h));
    dc_next = dc.cwiseProduct(gate.middleRows(h, h));
    dh_next.noalias() = U.transpose() * da;
    if (s > 0) dU.noalias() += da * hidden_.block(dir * h, cp, h, batch).transpose();
  }
  grads_[3 * dir].noalias() = dpre * x_.transpose();
  grads_[3 * dir + 2] = dpre.rowwise().sum();
}

template <typename S>
const typename Network<S>::M& Network<S>::forward(const M& x, int batch) {
  require(batch > 0, "batch must be positive");
  require(x.rows() == dims_.features &&
              x.cols() == static_cast<Eigen::Index>(dims_.window) * batch,
          "batch shape does not match the model");
  x_ = x;
  batch_ = batch;
  const int T = dims_.window;
  if (arch_ == Architecture::BiLstmCnn) {
    hidden_.resize(2 * dims_.hidden, static_cast<Eigen::Index>(T) * batch);
    lstm_forward(0, batch);
    lstm_forward(1, batch);
    conv_forward(hidden_, params_[6], params_[7], dims_.out_kernel, Padding::None, T, batch, y_);
  } else {
    conv_forward(x_, params_[0], params_[1], dims_.hidden_kernel, Padding::Same, T, batch, pre1_);
    act1_.resize(pre1_.rows(), pre1_.cols());
    act::eval_n(act_.tanh, pre1_.data(), act1_.data(), static_cast<std::size_t>(pre1_.size()));
    conv_forward(act1_, params_[2], params_[3], dims_.hidden_kernel, Padding::Same, T, batch,
                 pre2_);
    hidden_.resize(pre2_.rows(), pre2_.cols());
    act::eval_n(act_.tanh, pre2_.data(), hidden_.data(), static_cast<std::size_t>(pre2_.size()));
    conv_forward(hidden_, params_[4], params_[5], dims_.out_kernel, Padding::None, T, batch, y_);
  }
  return y_;
}

template <typename S>
void Network<S>::backward(const M& dy) {
  require(dy.rows() == y_.rows() && dy.cols() == y_.cols(), "output gradient shape mismatch");
  const int T = dims_.window;
  const int B = batch_;
  M dhidden;
  if (arch_ == Architecture::BiLstmCnn) {
    conv_backward(hidden_, params_[6], dy, dims_.out_kernel, Padding::None, T, B, grads_[6],
                  grads_[7], &dhidden);
    lstm_backward(0, B, dhidden);
    lstm_backward(1, B, dhidden);
    return;
  }
  auto tanh_grad = [&](const M& pre, const M& out) {
    M g(pre.rows(), pre.cols());
    if (act_.tanh.kind() == act::Kind::Exact) {
      g = M::Ones(pre.rows(), pre.cols()) - out.cwiseAbs2();
    } else {
      act::grad_n(act_.tanh, pre.data(), g.data(), static_cast<std::size_t>(pre.size()));
    }
    return g;
  };
  conv_backward(hidden_, params_[4], dy, dims_.out_kernel, Padding::None, T, B, grads_[4],
                grads_[5], &dhidden);
  const M dpre2 = dhidden.cwiseProduct(tanh_grad(pre2_, hidden_));
  M dact1;
  conv_backward(act1_, params_[2], dpre2, dims_.hidden_kernel, Padding::Same, T, B, grads_[2],
                grads_[3], &dact1);
  const M dpre1 = dact1.cwiseProduct(tanh_grad(pre1_, act1_));
  conv_backward(x_, params_[0], dpre1, dims_.hidden_kernel, Padding::Same, T, B, grads_[0],
                grads_[1], nullptr);
}

template class Network<float>;
template class Network<double>;

}  // namespace fibereq::nn
