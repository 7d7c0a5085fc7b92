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

#include "fibereq/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace fibereq::fx {

namespace {

constexpr std::int64_t kMax32 = std::numeric_limits<std::int32_t>::max();
constexpr std::int64_t kMin32 = std::numeric_limits<std::int32_t>::min();

double round_half_away(double v) { return v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5); }

std::int32_t saturate(std::int64_t v) {
  return static_cast<std::int32_t>(std::clamp(v, kMin32, kMax32));
}

// int64 accumulator that saturates instead of wrapping.
struct Acc {
  std::int64_t v = 0;
  void add(std::int64_t x) {
    if (__builtin_add_overflow(v, x, &v)) {
      v = x > 0 ? std::numeric_limits<std::int64_t>::max() : std::numeric_limits<std::int64_t>::min();
    }
  }
  void mac(std::int32_t a, std::int32_t b) { add(static_cast<std::int64_t>(a) * b); }
};

std::int32_t rescale(std::int64_t acc, int frac) {
  const std::int64_t half = std::int64_t{1} << (frac - 1);
  std::int64_t r;
  if (__builtin_add_overflow(acc, half, &r)) r = std::numeric_limits<std::int64_t>::max();
  return saturate(r >> frac);
}

struct Ctx {
  const FixedPointModel& m;
  int frac;
  std::int32_t act(const act::ActivationSpec& spec, std::int32_t q) const {
    return quantize_saturating(act::eval(spec, dequantize_value(q, frac)), frac);
  }
  std::int32_t mul(std::int32_t a, std::int32_t b) const {
    return rescale(static_cast<std::int64_t>(a) * b, frac);
  }
  std::int64_t bias(std::int32_t b) const { return static_cast<std::int64_t>(b) << frac; }
};

using IMat = std::vector<std::vector<std::int32_t>>;  // [time][channel]

IMat conv(const Ctx& ctx, const IMat& in, const QuantizedTensor& k, const QuantizedTensor& b,
          int ksize, bool same) {
  const int T = static_cast<int>(in.size());
  const int cin = static_cast<int>(in.front().size());
  const int cout = k.rows;
  const int t_out = same ? T : T - ksize + 1;
  const int shift = same ? -(ksize / 2) : 0;
  IMat out(static_cast<std::size_t>(t_out), std::vector<std::int32_t>(static_cast<std::size_t>(cout)));
  for (int t = 0; t < t_out; ++t) {
    for (int o = 0; o < cout; ++o) {
      Acc acc;
      acc.add(ctx.bias(b(o, 0)));
      for (int kk = 0; kk < ksize; ++kk) {
        const int src = t + kk + shift;
        if (src < 0 || src >= T) continue;
        for (int c = 0; c < cin; ++c) acc.mac(k(o, kk * cin + c), in[src][c]);
      }
      out[t][o] = rescale(acc.v, ctx.frac);
    }
  }
  return out;
}

}  // namespace

std::int32_t quantize_value(double v, int frac_bits) {
  const double s = round_half_away(std::ldexp(v, frac_bits));
  if (!(s >= static_cast<double>(kMin32) && s <= static_cast<double>(kMax32))) {
    throw NumericError("value " + std::to_string(v) + " does not fit int32 with " +
                       std::to_string(frac_bits) + " fractional bits");
  }
  return static_cast<std::int32_t>(s);
}

std::int32_t quantize_saturating(double v, int frac_bits) {
  if (std::isnan(v)) throw NumericError("cannot quantize NaN");
  const double s = round_half_away(std::ldexp(v, frac_bits));
  return static_cast<std::int32_t>(std::clamp(s, static_cast<double>(kMin32), static_cast<double>(kMax32)));
}

double dequantize_value(std::int32_t q, int frac_bits) {
  return std::ldexp(static_cast<double>(q), -frac_bits);
}

FixedPointModel quantize_int32(const nn::EqualizerModel& model, int frac_bits) {
  model.validate();
  require(frac_bits > 0 && frac_bits < 31, "frac_bits must lie in 1..30");
  require(model.activations.tanh.kind() != act::Kind::Exact,
          "fixed-point inference needs an approximated tanh");
  if (model.architecture == nn::Architecture::BiLstmCnn) {
    require(model.activations.sigmoid.kind() != act::Kind::Exact,
            "fixed-point inference needs an approximated sigmoid");
  }
  FixedPointModel q;
  q.architecture = model.architecture;
  q.dims = model.dims;
  q.activations = model.activations;
  q.frac_bits = frac_bits;
  const auto names = model.tensor_names();
  const double limit = std::ldexp(static_cast<double>(kMax32), -frac_bits);
  for (std::size_t i = 0; i < model.tensors.size(); ++i) {
    const nn::Mat& t = model.tensors[i];
    const double peak = t.size() > 0 ? t.cwiseAbs().maxCoeff() : 0.0;
    if (peak > limit) {
      std::ostringstream os;
      os << "tensor " << names[i] << " overflows int32: max |w| = " << peak << " exceeds "
         << limit << " at " << frac_bits << " fractional bits";
      throw NumericError(os.str());
    }
    QuantizedTensor qt;
    qt.rows = static_cast<int>(t.rows());
    qt.cols = static_cast<int>(t.cols());
    qt.data.resize(static_cast<std::size_t>(t.size()));
    for (Eigen::Index k = 0; k < t.size(); ++k) qt.data[static_cast<std::size_t>(k)] = quantize_value(t.data()[k], frac_bits);
    q.tensors.push_back(std::move(qt));
  }
  return q;
}

nn::EqualizerModel dequantize(const FixedPointModel& q) {
  nn::EqualizerModel m = nn::EqualizerModel::zeros(q.architecture, q.dims);
  m.activations = q.activations;
  require(q.tensors.size() == m.tensors.size(), "tensor count does not match the architecture");
  for (std::size_t i = 0; i < q.tensors.size(); ++i) {
    nn::Mat& t = m.tensors[i];
    require(q.tensors[i].rows == t.rows() && q.tensors[i].cols == t.cols(), "tensor shape mismatch");
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      t.data()[k] = dequantize_value(q.tensors[i].data[static_cast<std::size_t>(k)], q.frac_bits);
    }
  }
  return m;
}

nn::Mat fixed_forward(const FixedPointModel& m, const nn::Mat& window) {
  const nn::ModelDims& d = m.dims;
  require(window.rows() == d.window && window.cols() == d.features,
          "window shape does not match the model");
  const Ctx ctx{m, m.frac_bits};
  IMat x(static_cast<std::size_t>(d.window), std::vector<std::int32_t>(static_cast<std::size_t>(d.features)));
  for (int t = 0; t < d.window; ++t) {
    for (int c = 0; c < d.features; ++c) x[t][c] = quantize_saturating(window(t, c), m.frac_bits);
  }
  IMat out;
  if (m.architecture == nn::Architecture::BiLstmCnn) {
    const int h = d.hidden;
    IMat states(static_cast<std::size_t>(d.window), std::vector<std::int32_t>(static_cast<std::size_t>(2 * h)));
    std::vector<std::int32_t> pre(static_cast<std::size_t>(4 * h));
    for (int dir = 0; dir < 2; ++dir) {
      const auto& W = m.tensors[3 * dir];
      const auto& U = m.tensors[3 * dir + 1];
      const auto& b = m.tensors[3 * dir + 2];
      std::vector<std::int32_t> hp(static_cast<std::size_t>(h), 0), cp(static_cast<std::size_t>(h), 0);
      for (int s = 0; s < d.window; ++s) {
        const int t = dir == 0 ? s : d.window - 1 - s;
        for (int r = 0; r < 4 * h; ++r) {
          Acc acc;
          acc.add(ctx.bias(b(r, 0)));
          for (int j = 0; j < d.features; ++j) acc.mac(W(r, j), x[t][j]);
          for (int j = 0; j < h; ++j) acc.mac(U(r, j), hp[j]);
          pre[r] = rescale(acc.v, ctx.frac);
        }
        for (int j = 0; j < h; ++j) {
          const std::int32_t ig = ctx.act(m.activations.sigmoid, pre[j]);
          const std::int32_t fg = ctx.act(m.activations.sigmoid, pre[h + j]);
          const std::int32_t og = ctx.act(m.activations.sigmoid, pre[2 * h + j]);
          const std::int32_t cand = ctx.act(m.activations.tanh, pre[3 * h + j]);
          Acc cell;
          cell.mac(fg, cp[j]);
          cell.mac(ig, cand);
          cp[j] = rescale(cell.v, ctx.frac);
          hp[j] = ctx.mul(og, ctx.act(m.activations.tanh, cp[j]));
          states[t][dir * h + j] = hp[j];
        }
      }
    }
    out = conv(ctx, states, m.tensors[6], m.tensors[7], d.out_kernel, false);
  } else {
    IMat a1 = conv(ctx, x, m.tensors[0], m.tensors[1], d.hidden_kernel, true);
    for (auto& row : a1) {
      for (auto& v : row) v = ctx.act(m.activations.tanh, v);
    }
    IMat a2 = conv(ctx, a1, m.tensors[2], m.tensors[3], d.hidden_kernel, true);
    for (auto& row : a2) {
      for (auto& v : row) v = ctx.act(m.activations.tanh, v);
    }
    out = conv(ctx, a2, m.tensors[4], m.tensors[5], d.out_kernel, false);
  }
  nn::Mat y(d.n_out(), d.outputs);
  for (int t = 0; t < d.n_out(); ++t) {
    for (int o = 0; o < d.outputs; ++o) y(t, o) = dequantize_value(out[t][o], m.frac_bits);
  }
  return y;
}

nn::Equalized equalize_fixed(const FixedPointModel& m, const nn::SequenceData& data) {
  const nn::ModelDims& d = m.dims;
  require(data.size() >= static_cast<std::size_t>(d.window), "sequence shorter than one window");
  const std::size_t n_out = static_cast<std::size_t>(d.n_out());
  const std::size_t n_windows = (data.size() - static_cast<std::size_t>(d.window)) / n_out + 1;
  nn::Equalized eq;
  eq.first = static_cast<std::size_t>(d.offset());
  eq.symbols.resize(n_windows * n_out);
  for (std::size_t w = 0; w < n_windows; ++w) {
    const nn::Mat window =
        data.features.middleCols(static_cast<Eigen::Index>(w * n_out), d.window).transpose();
    const nn::Mat y = fixed_forward(m, window);
    for (std::size_t t = 0; t < n_out; ++t) {
      eq.symbols[w * n_out + t] = cplx{y(static_cast<Eigen::Index>(t), 0), y(static_cast<Eigen::Index>(t), 1)};
    }
  }
  return eq;
}

}  // namespace fibereq::fx
