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

#include "fibereq/channel.hpp"

namespace fibereq {

/// Time-domain chromatic dispersion compensation FIR.
struct CdcFilter {
  CVec taps;
  double sample_rate_hz = 0.0;

  /// Frequency response at angular frequency w (rad/s).
  cplx response(double omega) const;
};

inline constexpr int kDefaultCdcTaps = 517;
inline constexpr double kCdcTaperFraction = 0.2;

/// Minimum odd tap count able to hold the group-delay spread of the whole
/// link over a two-sided signal bandwidth. The flat part of the window has
/// to span 2 pi |beta2| L B fs samples; the Hann-tapered edges take the
/// remaining kCdcTaperFraction of the filter.
int cdc_min_taps(const FiberLinkParams& link, double sample_rate_hz, double signal_bw_hz);

/// Frequency-sampling design of the inverse accumulated dispersion
/// exp(+j beta2/2 w^2 L) truncated to n_taps with a Tukey window (Hann
/// edges). A link with no accumulated dispersion gives the single unit tap.
/// Throws InvalidArgument when n_taps is even or below cdc_min_taps.
CdcFilter design_cdc(const FiberLinkParams& link, int n_taps, double sample_rate_hz,
                     double signal_bw_hz);

/// Per-polarization convolution, same length, zero group delay (the middle
/// tap is aligned with the output sample), periodic boundary.
SignalFrame apply_cdc(const SignalFrame& frame, const CdcFilter& filter);

/// Ideal whole-link dispersion inversion in the frequency domain.
SignalFrame cdc_frequency_domain(const SignalFrame& frame, const FiberLinkParams& link);

/// Band-limited FFT resampling to a new rate. The output length is
/// round(n * target / fs) and the stored sample rate is adjusted so that the
/// frame duration is unchanged.
SignalFrame resample_fft(const SignalFrame& frame, double target_sample_rate_hz);

struct DbpConfig {
  int steps_per_span = 1;
  double sps = 2.3;
  double xi = 1.0;  // scaling of the nonlinear phase

  void validate() const;
};

/// Digital back-propagation. For each span in reverse order and each of its
/// sub-steps: undo the amplifier gain at the span end, invert dispersion and
/// loss of the sub-step, then remove the nonlinear phase
/// xi * (8/9) gamma (|A_h|^2 + |A_v|^2) L_eff of that sub-step.
SignalFrame dbp(const SignalFrame& frame, const FiberLinkParams& link, const DbpConfig& cfg);

/// Matched RRC filter and symbol-spaced decimation. A frame with a
/// non-integer rate is first resampled up to the next integer sps. The
/// sampling phase is `offset` unless a reference block is supplied, in which
/// case the phase with the largest correlation against it is chosen.
/// Rejects frames already at one sample per symbol.
SymbolBlock matched_filter_downsample(const SignalFrame& frame, double rolloff,
                                      int n_taps = kRrcTaps, int offset = 0,
                                      const SymbolBlock* reference = nullptr);

struct NormalizationResult {
  cplx k_dsp;
  double residual = 0.0;
};

struct NormalizedBlock {
  NormalizationResult h;
  NormalizationResult v;
  SymbolBlock symbols;
};

/// Least-squares complex scalar per polarization,
/// k = <rx, tx> / <rx, rx>, applied to the received symbols. Bits are taken
/// from the transmitted block.
NormalizedBlock normalize_kdsp(const SymbolBlock& received, const SymbolBlock& transmitted);

}  // namespace fibereq
