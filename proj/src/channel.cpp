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

#include "fibereq/channel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fibereq/fft.hpp"

namespace fibereq {

// ---------------------------------------------------------------------------
// FiberLinkParams

void FiberLinkParams::validate() const {
  auto finite = [](double v) { return std::isfinite(v); };
  require(finite(alpha_db_per_km) && alpha_db_per_km >= 0.0, "alpha must be >= 0");
  require(finite(dispersion_ps_nm_km), "dispersion must be finite");
  require(finite(gamma_w_km) && gamma_w_km >= 0.0, "gamma must be >= 0");
  require(finite(lambda_nm) && lambda_nm > 0.0, "wavelength must be > 0");
  require(finite(span_km) && span_km > 0.0, "span length must be > 0");
  require(n_spans >= 0, "span count must be >= 0");
  require(finite(edfa_nf_db), "noise figure must be finite");
  require(finite(step_km) && step_km > 0.0, "step must be > 0");
  const double ratio = span_km / step_km;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0,
          "step_km must divide span_km exactly");
}

double FiberLinkParams::alpha_per_m() const {
  return alpha_db_per_km / (10.0 * std::log10(std::exp(1.0))) / 1e3;
}

double FiberLinkParams::beta2_s2_per_m() const {
  const double d_si = dispersion_ps_nm_km * 1e-6;  // s/m^2
  const double lambda = lambda_nm * 1e-9;
  return -d_si * lambda * lambda / (2.0 * kPi * kSpeedOfLight);
}

double FiberLinkParams::gamma_per_w_m() const { return gamma_w_km * 1e-3; }

double FiberLinkParams::carrier_hz() const { return kSpeedOfLight / (lambda_nm * 1e-9); }

int FiberLinkParams::steps_per_span() const {
  return static_cast<int>(std::lround(span_km / step_km));
}

double FiberLinkParams::span_loss_linear() const {
  return std::exp(alpha_per_m() * span_m());
}

// ---------------------------------------------------------------------------
// SignalFrame

void SignalFrame::validate() const {
  require(h.size() == v.size(), "polarization lengths differ");
  require(symbol_rate_bd > 0.0, "symbol rate must be > 0");
  require(sample_rate_hz >= symbol_rate_bd, "sample rate below symbol rate");
}

double SignalFrame::mean_power() const {
  if (h.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) acc += std::norm(h[i]) + std::norm(v[i]);
  return acc / static_cast<double>(h.size());
}

// ---------------------------------------------------------------------------
// Bits and 16QAM

Bits generate_bits(std::size_t n_bits, std::uint64_t seed) {
  require(n_bits > 0, "n_bits must be > 0");
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937 gen(seq);
  Bits bits(n_bits);
  std::uint32_t word = 0;
  for (std::size_t i = 0; i < n_bits; ++i) {
    if (i % 32 == 0) word = gen();
    bits[i] = static_cast<std::uint8_t>((word >> (i % 32)) & 1u);
  }
  return bits;
}

namespace {

// Gray order along one axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
constexpr double kLevels[4] = {-3.0, -1.0, 1.0, 3.0};
constexpr int kGrayToLevel[4] = {0, 1, 3, 2};  // index = 2*b0 + b1
constexpr int kLevelToGray[4] = {0, 1, 3, 2};

int axis_decision(double x) {
  const double u = x / kQam16Scale;
  if (u < -2.0) return 0;
  if (u < 0.0) return 1;
  if (u < 2.0) return 2;
  return 3;
}

}  // namespace

CVec map_16qam(std::span<const std::uint8_t> bits) {
  require(bits.size() % kBitsPerSymbol == 0, "bit count must be divisible by 4");
  CVec out(bits.size() / kBitsPerSymbol);
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto* b = bits.data() + kBitsPerSymbol * s;
    const int gi = 2 * (b[0] & 1) + (b[1] & 1);
    const int gq = 2 * (b[2] & 1) + (b[3] & 1);
    out[s] = cplx(kLevels[kGrayToLevel[gi]], kLevels[kGrayToLevel[gq]]) * kQam16Scale;
  }
  return out;
}

Bits demap_16qam(std::span<const cplx> symbols) {
  Bits bits(symbols.size() * kBitsPerSymbol);
  for (std::size_t s = 0; s < symbols.size(); ++s) {
    const int gi = kLevelToGray[axis_decision(symbols[s].real())];
    const int gq = kLevelToGray[axis_decision(symbols[s].imag())];
    auto* b = bits.data() + kBitsPerSymbol * s;
    b[0] = static_cast<std::uint8_t>(gi >> 1);
    b[1] = static_cast<std::uint8_t>(gi & 1);
    b[2] = static_cast<std::uint8_t>(gq >> 1);
    b[3] = static_cast<std::uint8_t>(gq & 1);
  }
  return bits;
}

SymbolBlock make_symbol_block(std::size_t n_symbols, std::uint64_t seed,
                              double symbol_rate_bd) {
  const std::size_t per_pol = n_symbols * kBitsPerSymbol;
  Bits all = generate_bits(2 * per_pol, seed);
  SymbolBlock block;
  block.bits_h.assign(all.begin(), all.begin() + static_cast<long>(per_pol));
  block.bits_v.assign(all.begin() + static_cast<long>(per_pol), all.end());
  block.h = map_16qam(block.bits_h);
  block.v = map_16qam(block.bits_v);
  block.symbol_rate_bd = symbol_rate_bd;
  return block;
}

// ---------------------------------------------------------------------------
// Pulse shaping

std::vector<double> rrc_taps(double rolloff, int sps, int n_taps) {
  require(rolloff > 0.0 && rolloff <= 1.0, "roll-off must be in (0, 1]");
  require(sps > 1, "sps must be > 1");
  require(n_taps > 0 && n_taps % 2 == 1, "RRC tap count must be odd");
  const int half = n_taps / 2;
  const double b = rolloff;
  std::vector<double> h(static_cast<std::size_t>(n_taps));
  for (int k = -half; k <= half; ++k) {
    const double t = static_cast<double>(k) / sps;  // in symbol periods
    double val;
    if (k == 0) {
      val = 1.0 - b + 4.0 * b / kPi;
    } else if (std::abs(std::abs(4.0 * b * t) - 1.0) < 1e-10) {
      val = b / std::sqrt(2.0) *
            ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * b)) +
             (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * b)));
    } else {
      const double num = std::sin(kPi * t * (1.0 - b)) + 4.0 * b * t * std::cos(kPi * t * (1.0 + b));
      const double den = kPi * t * (1.0 - (4.0 * b * t) * (4.0 * b * t));
      val = num / den;
    }
    h[static_cast<std::size_t>(k + half)] = val;
  }
  double energy = 0.0;
  for (double x : h) energy += x * x;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& x : h) x *= norm;
  return h;
}

SignalFrame rrc_shape(const SymbolBlock& symbols, double rolloff, int sps, int n_taps) {
  require(symbols.h.size() == symbols.v.size(), "polarization lengths differ");
  require(symbols.symbol_rate_bd > 0.0, "symbol rate must be > 0");
  const auto taps_r = rrc_taps(rolloff, sps, n_taps);
  const double gain = std::sqrt(static_cast<double>(sps));
  CVec taps(taps_r.size());
  for (std::size_t i = 0; i < taps.size(); ++i) taps[i] = taps_r[i] * gain;

  auto shape = [&](const CVec& sym) {
    CVec up(sym.size() * static_cast<std::size_t>(sps), cplx{0.0, 0.0});
    for (std::size_t k = 0; k < sym.size(); ++k) up[k * static_cast<std::size_t>(sps)] = sym[k];
    return circular_filter(up, taps);
  };
  SignalFrame frame;
  frame.h = shape(symbols.h);
  frame.v = shape(symbols.v);
  frame.symbol_rate_bd = symbols.symbol_rate_bd;
  frame.sample_rate_hz = symbols.symbol_rate_bd * sps;
  return frame;
}

void set_launch_power(SignalFrame& frame, double launch_power_dbm) {
  const double p = frame.mean_power();
  require(p > 0.0, "cannot scale a zero-power frame");
  const double s = std::sqrt(dbm_to_watt(launch_power_dbm) / p);
  for (auto& x : frame.h) x *= s;
  for (auto& x : frame.v) x *= s;
}

// ---------------------------------------------------------------------------
// Propagation

double ase_variance_per_pol(const FiberLinkParams& link, double sample_rate_hz) {
  const double g = link.span_loss_linear();
  const double nf = db_to_linear(link.edfa_nf_db);
  // n_sp (G - 1) with n_sp = (NF G - 1) / (2 (G - 1)).
  const double nsp_g1 = std::max(0.0, (nf * g - 1.0) / 2.0);
  return nsp_g1 * kPlanck * link.carrier_hz() * sample_rate_hz;
}

namespace {

void check_finite(const CVec& x) {
  for (const auto& s : x) {
    if (!std::isfinite(s.real()) || !std::isfinite(s.imag())) {
      throw InvalidArgument("frame contains non-finite samples");
    }
  }
}

}  // namespace

SignalFrame ssfm_propagate(const SignalFrame& frame, const FiberLinkParams& link,
                           std::optional<std::uint64_t> ase_seed) {
  frame.validate();
  link.validate();
  const std::size_t n = frame.size();
  require(is_power_of_two(n), "SSFM frame length must be a power of two");
  check_finite(frame.h);
  check_finite(frame.v);

  SignalFrame out = frame;
  if (link.n_spans == 0) return out;

  const double fs = frame.sample_rate_hz;
  const double beta2 = link.beta2_s2_per_m();
  const double alpha = link.alpha_per_m();
  const double gamma_eff = 8.0 / 9.0 * link.gamma_per_w_m();
  const double h = link.step_km * 1e3;
  const int steps = link.steps_per_span();
  const double l_eff = alpha > 0.0 ? (1.0 - std::exp(-alpha * h)) / alpha : h;
  const double step_amp = std::exp(-alpha * h / 2.0);

  CVec half(n), full(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = fft_omega(k, n, fs);
    half[k] = std::polar(1.0, -0.5 * beta2 * w * w * h / 2.0);
    full[k] = half[k] * half[k];
  }

  Fft fft(n);
  auto linear = [&](const CVec& op) {
    for (CVec* pol : {&out.h, &out.v}) {
      fft.forward(*pol);
      for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= op[k];
      fft.inverse(*pol);
    }
  };
  auto nonlinear = [&]() {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::norm(out.h[i]) + std::norm(out.v[i]);
      const cplx rot = std::polar(step_amp, -gamma_eff * p * l_eff);
      out.h[i] *= rot;
      out.v[i] *= rot;
    }
  };

  const double amp_gain = std::sqrt(link.span_loss_linear());
  std::mt19937_64 rng(ase_seed.value_or(0));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double ase_std = std::sqrt(ase_variance_per_pol(link, fs) / 2.0);

  for (int span = 0; span < link.n_spans; ++span) {
    linear(half);
    for (int s = 0; s < steps; ++s) {
      nonlinear();
      linear(s + 1 == steps ? half : full);
    }
    for (CVec* pol : {&out.h, &out.v}) {
      for (auto& x : *pol) x *= amp_gain;
      if (ase_seed) {
        for (auto& x : *pol) {
          const double re = normal(rng);
          const double im = normal(rng);
          x += cplx(re, im) * ase_std;
        }
      }
    }
  }
  return out;
}

SymbolBlock add_transceiver_noise(const SymbolBlock& symbols, double sigma,
                                  std::uint64_t seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), "sigma must be >= 0");
  SymbolBlock out = symbols;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double s = sigma / std::sqrt(2.0);
  for (CVec* pol : {&out.h, &out.v}) {
    for (auto& x : *pol) {
      const double re = normal(rng);
      const double im = normal(rng);
      x += cplx(re, im) * s;
    }
  }
  return out;
}

}  // namespace fibereq
