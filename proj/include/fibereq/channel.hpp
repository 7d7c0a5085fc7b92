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
#include <optional>
#include <span>

#include "fibereq/common.hpp"

namespace fibereq {

/// Physical description of a multi-span amplified fiber link.
///
/// Defaults describe the 17 x 70 km LEAF link (alpha 0.225 dB/km,
/// D 4.2 ps/(nm km), gamma 2 /(W km), 1550 nm) with a 1 km SSFM step.
struct FiberLinkParams {
  double alpha_db_per_km = 0.225;
  double dispersion_ps_nm_km = 4.2;
  double gamma_w_km = 2.0;
  double lambda_nm = 1550.0;
  double span_km = 70.0;
  int n_spans = 17;
  double edfa_nf_db = 4.5;
  double step_km = 1.0;

  /// Throws InvalidArgument on a non-physical configuration. Zero loss, zero
  /// nonlinearity and zero spans are accepted so that linear-only and
  /// identity links can be expressed.
  void validate() const;

  double alpha_per_m() const;    // power attenuation, 1/m
  double beta2_s2_per_m() const; // group-velocity dispersion, s^2/m
  double gamma_per_w_m() const;
  double carrier_hz() const;
  double span_m() const { return span_km * 1e3; }
  double total_length_m() const { return span_m() * n_spans; }
  int steps_per_span() const;
  double span_loss_linear() const; // power gain that compensates one span
};

/// Dual-polarization complex baseband waveform, |a|^2 in watts.
struct SignalFrame {
  CVec h;
  CVec v;
  double sample_rate_hz = 0.0;
  double symbol_rate_bd = 0.0;

  std::size_t size() const { return h.size(); }
  double sps() const { return sample_rate_hz / symbol_rate_bd; }
  void validate() const;
  double mean_power() const;  // total over both polarizations
};

/// Dual-polarization symbols at one sample per symbol plus the bits that
/// generated them (4 bits per 16QAM symbol and polarization).
struct SymbolBlock {
  CVec h;
  CVec v;
  Bits bits_h;
  Bits bits_v;
  double symbol_rate_bd = 0.0;

  std::size_t size() const { return h.size(); }
};

inline constexpr int kBitsPerSymbol = 4;
inline constexpr double kQam16Scale = 0.31622776601683794;  // 1/sqrt(10)

/// Uniform bits from a seeded 32-bit Mersenne Twister, LSB first per draw.
Bits generate_bits(std::size_t n_bits, std::uint64_t seed);

/// Gray-mapped 16QAM with unit average power. Bits (b0 b1 b2 b3) select the
/// in-phase level from (b0 b1) and the quadrature level from (b2 b3).
CVec map_16qam(std::span<const std::uint8_t> bits);

/// Minimum-distance hard decision, inverse of map_16qam on the grid.
Bits demap_16qam(std::span<const cplx> symbols);

/// Builds a SymbolBlock of n_symbols per polarization from a seed.
SymbolBlock make_symbol_block(std::size_t n_symbols, std::uint64_t seed,
                              double symbol_rate_bd);

/// Root-raised-cosine impulse response sampled at sps samples/symbol,
/// n_taps odd, normalized to unit energy.
std::vector<double> rrc_taps(double rolloff, int sps, int n_taps);

inline constexpr int kRrcTaps = 1025;

/// Upsamples and pulse-shapes both polarizations. Output has the same mean
/// power per polarization as the input symbols.
SignalFrame rrc_shape(const SymbolBlock& symbols, double rolloff, int sps,
                      int n_taps = kRrcTaps);

/// Scales a frame so that its total (dual-pol) mean power equals launch
/// power in dBm.
void set_launch_power(SignalFrame& frame, double launch_power_dbm);

/// Split-step Fourier integration of the Manakov equations over every span,
/// each followed by an EDFA whose gain equals the span loss. ASE noise is
/// added when `ase_seed` is present, otherwise the amplifiers are noiseless.
///
/// Field convention: dA/dz = -alpha/2 A + j beta2/2 d2A/dt2
///                           - j (8/9) gamma (|A_h|^2 + |A_v|^2) A
/// so linear propagation over z multiplies bin w by exp(-j beta2/2 w^2 z).
SignalFrame ssfm_propagate(const SignalFrame& frame, const FiberLinkParams& link,
                           std::optional<std::uint64_t> ase_seed);

/// Adds i.i.d. circular complex Gaussian noise with E|n|^2 = sigma^2.
SymbolBlock add_transceiver_noise(const SymbolBlock& symbols, double sigma,
                                  std::uint64_t seed);

/// Per-polarization ASE noise variance (W) injected by one amplifier with
/// gain G over the simulation bandwidth fs.
double ase_variance_per_pol(const FiberLinkParams& link, double sample_rate_hz);

}  // namespace fibereq
