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

#include "fibereq/dsp.hpp"

#include <algorithm>
#include <cmath>

#include "fibereq/fft.hpp"

namespace fibereq {

cplx CdcFilter::response(double omega) const {
  const long half = static_cast<long>(taps.size() / 2);
  cplx acc{0.0, 0.0};
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const double lag = static_cast<double>(static_cast<long>(k) - half);
    acc += taps[k] * std::polar(1.0, -omega * lag / sample_rate_hz);
  }
  return acc;
}

int cdc_min_taps(const FiberLinkParams& link, double sample_rate_hz, double signal_bw_hz) {
  const double spread_s =
      std::abs(link.beta2_s2_per_m()) * link.total_length_m() * 2.0 * kPi * signal_bw_hz;
  const double samples = spread_s * sample_rate_hz / (1.0 - kCdcTaperFraction);
  int n = static_cast<int>(std::ceil(samples)) + 1;
  if (n % 2 == 0) ++n;
  return n;
}

namespace {

double tukey(long lag, long half) {
  if (half == 0) return 1.0;
  const double u = std::abs(static_cast<double>(lag)) / static_cast<double>(half);  // 0..1
  const double flat = 1.0 - kCdcTaperFraction;
  if (u <= flat) return 1.0;
  const double t = (u - flat) / kCdcTaperFraction;
  return 0.5 * (1.0 + std::cos(kPi * t));
}

}  // namespace

CdcFilter design_cdc(const FiberLinkParams& link, int n_taps, double sample_rate_hz,
                     double signal_bw_hz) {
  link.validate();
  require(n_taps > 0 && n_taps % 2 == 1, "CDC tap count must be odd");
  require(sample_rate_hz > 0.0, "sample rate must be > 0");
  CdcFilter filter;
  filter.sample_rate_hz = sample_rate_hz;
  const double acc = link.beta2_s2_per_m() * link.total_length_m();
  if (acc == 0.0) {
    filter.taps = {cplx{1.0, 0.0}};
    return filter;
  }
  const int needed = cdc_min_taps(link, sample_rate_hz, signal_bw_hz);
  if (n_taps < needed) {
    throw InvalidArgument("CDC needs at least " + std::to_string(needed) +
                          " taps for this link, got " + std::to_string(n_taps));
  }
  std::size_t grid = 4096;
  while (grid < 8 * static_cast<std::size_t>(n_taps)) grid *= 2;
  CVec resp(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    const double w = fft_omega(k, grid, sample_rate_hz);
    resp[k] = std::polar(1.0, 0.5 * acc * w * w);
  }
  Fft fft(grid);
  fft.inverse(resp);  // resp now holds h[lag] at index lag mod grid
  const long half = n_taps / 2;
  filter.taps.resize(static_cast<std::size_t>(n_taps));
  for (long lag = -half; lag <= half; ++lag) {
    const std::size_t idx = static_cast<std::size_t>((lag + static_cast<long>(grid)) % static_cast<long>(grid));
    filter.taps[static_cast<std::size_t>(lag + half)] = resp[idx] * tukey(lag, half);
  }
  return filter;
}

SignalFrame apply_cdc(const SignalFrame& frame, const CdcFilter& filter) {
  frame.validate();
  require(std::abs(frame.sample_rate_hz - filter.sample_rate_hz) <= 1e-9 * frame.sample_rate_hz,
          "CDC filter sample rate does not match the frame");
  SignalFrame out = frame;
  out.h = circular_filter(frame.h, filter.taps);
  out.v = circular_filter(frame.v, filter.taps);
  return out;
}

namespace {

void dispersion_in_place(SignalFrame& frame, double beta2_times_length, double amplitude,
                         const Fft& fft) {
  const std::size_t n = frame.size();
  for (CVec* pol : {&frame.h, &frame.v}) {
    fft.forward(*pol);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = fft_omega(k, n, frame.sample_rate_hz);
      (*pol)[k] *= std::polar(amplitude, 0.5 * beta2_times_length * w * w);
    }
    fft.inverse(*pol);
  }
}

}  // namespace

SignalFrame cdc_frequency_domain(const SignalFrame& frame, const FiberLinkParams& link) {
  frame.validate();
  link.validate();
  SignalFrame out = frame;
  if (frame.size() == 0) return out;
  Fft fft(frame.size());
  dispersion_in_place(out, link.beta2_s2_per_m() * link.total_length_m(), 1.0, fft);
  return out;
}

SignalFrame resample_fft(const SignalFrame& frame, double target_sample_rate_hz) {
  frame.validate();
  require(target_sample_rate_hz >= frame.symbol_rate_bd, "target rate below symbol rate");
  const std::size_t n = frame.size();
  const auto m = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * target_sample_rate_hz / frame.sample_rate_hz));
  require(m > 0, "resampled frame would be empty");
  SignalFrame out;
  out.symbol_rate_bd = frame.symbol_rate_bd;
  out.sample_rate_hz = frame.sample_rate_hz * static_cast<double>(m) / static_cast<double>(n);
  if (m == n) {
    out.h = frame.h;
    out.v = frame.v;
    return out;
  }
  Fft fin(n), fout(m);
  const std::size_t keep = std::min(n, m);
  const std::size_t pos = (keep + 1) / 2;  // bins 0..pos-1 are non-negative
  const std::size_t neg = keep - pos;
  const double scale = static_cast<double>(m) / static_cast<double>(n);
  auto one = [&](const CVec& in) {
    CVec spec(in);
    fin.forward(spec);
    CVec res(m, cplx{0.0, 0.0});
    for (std::size_t k = 0; k < pos; ++k) res[k] = spec[k] * scale;
    for (std::size_t k = 1; k <= neg; ++k) res[m - k] = spec[n - k] * scale;
    fout.inverse(res);
    return res;
  };
  out.h = one(frame.h);
  out.v = one(frame.v);
  return out;
}

void DbpConfig::validate() const {
  require(steps_per_span >= 1, "DBP needs at least one step per span");
  require(sps > 1.0 && std::isfinite(sps), "DBP sps must be > 1");
  require(xi >= 0.0 && xi <= 2.0, "DBP xi must lie in [0, 2]");
}

SignalFrame dbp(const SignalFrame& frame, const FiberLinkParams& link, const DbpConfig& cfg) {
  frame.validate();
  link.validate();
  cfg.validate();
  require(std::abs(frame.sps() - cfg.sps) < 1e-3 * cfg.sps,
          "frame must be resampled to the DBP rate first");
  SignalFrame out = frame;
  if (link.n_spans == 0 || frame.size() == 0) return out;
  const std::size_t n = frame.size();
  const double alpha = link.alpha_per_m();
  const double h = link.span_m() / cfg.steps_per_span;
  const double l_eff = alpha > 0.0 ? (1.0 - std::exp(-alpha * h)) / alpha : h;
  const double phase_scale = cfg.xi * 8.0 / 9.0 * link.gamma_per_w_m() * l_eff;
  const double inv_gain = 1.0 / std::sqrt(link.span_loss_linear());
  const double step_amp = std::exp(alpha * h / 2.0);
  const double beta2 = link.beta2_s2_per_m();
  Fft fft(n);
  for (int span = 0; span < link.n_spans; ++span) {
    for (auto& x : out.h) x *= inv_gain;
    for (auto& x : out.v) x *= inv_gain;
    for (int s = 0; s < cfg.steps_per_span; ++s) {
      dispersion_in_place(out, beta2 * h, step_amp, fft);
      if (phase_scale != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          const double p = std::norm(out.h[i]) + std::norm(out.v[i]);
          const cplx rot = std::polar(1.0, phase_scale * p);
          out.h[i] *= rot;
          out.v[i] *= rot;
        }
      }
    }
  }
  return out;
}

SymbolBlock matched_filter_downsample(const SignalFrame& frame, double rolloff, int n_taps,
                                      int offset, const SymbolBlock* reference) {
  frame.validate();
  const double sps_real = frame.sps();
  require(sps_real > 1.0 + 1e-9, "frame is already at one sample per symbol");
  SignalFrame work;
  int sps = static_cast<int>(std::lround(sps_real));
  if (std::abs(sps_real - sps) > 1e-9 * sps_real) {
    sps = static_cast<int>(std::ceil(sps_real));
    work = resample_fft(frame, frame.symbol_rate_bd * sps);
  } else {
    work = frame;
  }
  const auto base = rrc_taps(rolloff, sps, n_taps);
  const double gain = 1.0 / std::sqrt(static_cast<double>(sps));
  CVec taps(base.size());
  for (std::size_t i = 0; i < taps.size(); ++i) taps[i] = base[i] * gain;
  const CVec fh = circular_filter(work.h, taps);
  const CVec fv = circular_filter(work.v, taps);
  const std::size_t n_sym = work.size() / static_cast<std::size_t>(sps);

  auto decimate = [&](const CVec& x, int off) {
    CVec y(n_sym);
    for (std::size_t k = 0; k < n_sym; ++k) {
      y[k] = x[(k * static_cast<std::size_t>(sps) + static_cast<std::size_t>(off)) % x.size()];
    }
    return y;
  };

  int chosen = ((offset % sps) + sps) % sps;
  if (reference != nullptr) {
    require(reference->size() == n_sym, "reference length does not match the frame");
    double best = -1.0;
    for (int off = 0; off < sps; ++off) {
      const CVec y = decimate(fh, off);
      cplx c{0.0, 0.0};
      double e = 0.0;
      for (std::size_t k = 0; k < n_sym; ++k) {
        c += std::conj(reference->h[k]) * y[k];
        e += std::norm(y[k]);
      }
      const double score = e > 0.0 ? std::abs(c) / std::sqrt(e) : 0.0;
      if (score > best) {
        best = score;
        chosen = off;
      }
    }
  }
  SymbolBlock out;
  out.h = decimate(fh, chosen);
  out.v = decimate(fv, chosen);
  out.symbol_rate_bd = frame.symbol_rate_bd;
  if (reference != nullptr) {
    out.bits_h = reference->bits_h;
    out.bits_v = reference->bits_v;
  }
  return out;
}

namespace {

NormalizationResult fit_scalar(const CVec& rx, const CVec& tx) {
  cplx num{0.0, 0.0};
  double den = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    num += std::conj(rx[i]) * tx[i];
    den += std::norm(rx[i]);
  }
  if (!(den > 0.0)) throw InvalidArgument("received block has zero energy");
  NormalizationResult r;
  r.k_dsp = num / den;
  double res = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) res += std::norm(r.k_dsp * rx[i] - tx[i]);
  r.residual = std::sqrt(res);
  return r;
}

}  // namespace

NormalizedBlock normalize_kdsp(const SymbolBlock& received, const SymbolBlock& transmitted) {
  require(received.h.size() == transmitted.h.size() && received.v.size() == transmitted.v.size(),
          "received and transmitted blocks differ in length");
  NormalizedBlock out;
  out.h = fit_scalar(received.h, transmitted.h);
  out.v = fit_scalar(received.v, transmitted.v);
  out.symbols = received;
  for (auto& x : out.symbols.h) x *= out.h.k_dsp;
  for (auto& x : out.symbols.v) x *= out.v.k_dsp;
  out.symbols.bits_h = transmitted.bits_h;
  out.symbols.bits_v = transmitted.bits_v;
  out.symbols.symbol_rate_bd = transmitted.symbol_rate_bd;
  return out;
}

}  // namespace fibereq
