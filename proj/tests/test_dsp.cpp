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

#include <doctest.h>

#include "fibereq/dsp.hpp"
#include "fibereq/metrics.hpp"
#include "test_util.hpp"

using namespace fibereq;
using fibereq::test::evm;

namespace {

constexpr double kRs = 34e9;

SignalFrame shaped(std::size_t n, double power_dbm, std::uint64_t seed = 4) {
  SignalFrame f = rrc_shape(make_symbol_block(n, seed, kRs), 0.1, 4);
  set_launch_power(f, power_dbm);
  return f;
}

}  // namespace

TEST_CASE("default link fits in 517 CDC taps") {
  const FiberLinkParams link;
  const double fs = 4 * kRs;
  CHECK(cdc_min_taps(link, fs, 1.1 * kRs) <= kDefaultCdcTaps);
  const CdcFilter f = design_cdc(link, kDefaultCdcTaps, fs, 1.1 * kRs);
  CHECK(f.taps.size() == 517);
}

TEST_CASE("CDC rejects even or insufficient tap counts") {
  const FiberLinkParams link;
  CHECK_THROWS_AS(design_cdc(link, 516, 4 * kRs, 1.1 * kRs), InvalidArgument);
  CHECK_THROWS_AS(design_cdc(link, 31, 4 * kRs, 1.1 * kRs), InvalidArgument);
}

TEST_CASE("link without accumulated dispersion gives the unit tap") {
  FiberLinkParams link;
  link.n_spans = 0;
  const CdcFilter f = design_cdc(link, 1, 4 * kRs, 1.1 * kRs);
  REQUIRE(f.taps.size() == 1);
  CHECK(std::abs(f.taps[0] - cplx(1.0, 0.0)) < 1e-15);
}

TEST_CASE("CDC filter is all-pass over the signal band") {
  const FiberLinkParams link;
  const CdcFilter f = design_cdc(link, kDefaultCdcTaps, 4 * kRs, 1.1 * kRs);
  double worst_db = 0.0;
  for (int k = -200; k <= 200; ++k) {
    const double hz = 0.55 * kRs * k / 200.0;
    const double mag = std::abs(f.response(2.0 * kPi * hz));
    worst_db = std::max(worst_db, std::abs(20.0 * std::log10(mag)));
  }
  CHECK(worst_db < 0.1);
}

TEST_CASE("identity filter leaves the frame unchanged") {
  const SignalFrame f = shaped(512, 0.0);
  CdcFilter id;
  id.taps = {cplx(1.0, 0.0)};
  id.sample_rate_hz = f.sample_rate_hz;
  const SignalFrame g = apply_cdc(f, id);
  CHECK(evm(g.h, f.h, 0, f.size()) < 1e-14);
  CHECK(evm(g.v, f.v, 0, f.size()) < 1e-14);
}

TEST_CASE("CDC preserves energy and rejects a rate mismatch") {
  const FiberLinkParams link;
  const SignalFrame f = shaped(4096, 0.0);
  const CdcFilter cdc = design_cdc(link, kDefaultCdcTaps, f.sample_rate_hz, 1.1 * kRs);
  const SignalFrame g = apply_cdc(f, cdc);
  const double ratio = (fibereq::test::energy(g.h) + fibereq::test::energy(g.v)) /
                       (fibereq::test::energy(f.h) + fibereq::test::energy(f.v));
  CHECK(std::abs(10.0 * std::log10(ratio)) < 0.1);

  CdcFilter wrong = cdc;
  wrong.sample_rate_hz = 2 * kRs;
  CHECK_THROWS_AS(apply_cdc(f, wrong), InvalidArgument);
}

TEST_CASE("DBP without the nonlinear term equals whole-link dispersion inversion") {
  FiberLinkParams link;
  link.n_spans = 4;
  const SignalFrame f = shaped(2048, 2.0);
  const SignalFrame rx = ssfm_propagate(f, link, std::nullopt);
  const SignalFrame low = resample_fft(rx, 2.3 * kRs);
  DbpConfig cfg;
  cfg.xi = 0.0;
  cfg.sps = low.sps();
  const SignalFrame a = dbp(low, link, cfg);
  const SignalFrame b = cdc_frequency_domain(low, link);
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max({worst, std::abs(a.h[i] - b.h[i]), std::abs(a.v[i] - b.v[i])});
    peak = std::max(peak, std::abs(b.h[i]));
  }
  CHECK(worst < 1e-6 * peak);
}

TEST_CASE("DBP outperforms CDC in the nonlinear regime") {
  FiberLinkParams link;
  const SymbolBlock tx = make_symbol_block(4096, 12, kRs);
  SignalFrame f = rrc_shape(tx, 0.1, 4);
  set_launch_power(f, 6.0);
  const SignalFrame rx = ssfm_propagate(f, link, std::nullopt);
  const SymbolBlock cdc = normalize_kdsp(matched_filter_downsample(cdc_frequency_domain(rx, link), 0.1), tx).symbols;
  const SignalFrame low = resample_fft(rx, 2.3 * kRs);
  DbpConfig cfg;
  cfg.sps = low.sps();
  const SymbolBlock dbp_rx =
      normalize_kdsp(matched_filter_downsample(resample_fft(dbp(low, link, cfg), rx.sample_rate_hz), 0.1), tx).symbols;
  CHECK(evm(dbp_rx.h, tx.h, 200, 3896) < 0.8 * evm(cdc.h, tx.h, 200, 3896));
}

TEST_CASE("DBP configuration is validated") {
  DbpConfig c;
  c.xi = 2.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c.xi = 1.0;
  c.steps_per_span = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("matched filter output length and one-sample-per-symbol rejection") {
  const SymbolBlock tx = make_symbol_block(1000, 2, kRs);
  const SignalFrame f = rrc_shape(tx, 0.1, 4);
  const SymbolBlock rx = matched_filter_downsample(f, 0.1);
  CHECK(rx.size() == 1000);
  SignalFrame one;
  one.h = rx.h;
  one.v = rx.v;
  one.symbol_rate_bd = kRs;
  one.sample_rate_hz = kRs;
  CHECK_THROWS_AS(matched_filter_downsample(one, 0.1), InvalidArgument);
}

TEST_CASE("matched filter picks the correlating phase when given a reference") {
  const SymbolBlock tx = make_symbol_block(2048, 5, kRs);
  SignalFrame f = rrc_shape(tx, 0.1, 4);
  std::rotate(f.h.begin(), f.h.end() - 2, f.h.end());
  std::rotate(f.v.begin(), f.v.end() - 2, f.v.end());
  const SymbolBlock rx = matched_filter_downsample(f, 0.1, kRrcTaps, 0, &tx);
  CHECK(evm(rx.h, tx.h, 0, tx.size()) < 0.01);
}

TEST_CASE("k_dsp undoes scaling and rotation") {
  const SymbolBlock tx = make_symbol_block(256, 1, kRs);
  SymbolBlock twice = tx, rotated = tx;
  for (auto* p : {&twice.h, &twice.v}) for (auto& x : *p) x *= 2.0;
  for (auto* p : {&rotated.h, &rotated.v}) for (auto& x : *p) x *= cplx(0.0, 1.0);
  const auto a = normalize_kdsp(twice, tx);
  CHECK(std::abs(a.h.k_dsp - cplx(0.5, 0.0)) < 1e-14);
  const auto b = normalize_kdsp(rotated, tx);
  CHECK(std::abs(b.h.k_dsp - cplx(0.0, -1.0)) < 1e-14);
  CHECK(b.h.residual < 1e-20);
  CHECK(b.symbols.bits_h == tx.bits_h);
}

TEST_CASE("k_dsp inverts a random complex gain and scales inversely") {
  const SymbolBlock tx = make_symbol_block(512, 3, kRs);
  const cplx K(0.37, -1.21);
  SymbolBlock rx = tx;
  for (auto* p : {&rx.h, &rx.v}) for (auto& x : *p) x *= K;
  const auto n = normalize_kdsp(rx, tx);
  CHECK(std::abs(n.h.k_dsp * K - 1.0) < 1e-12);
  CHECK(std::abs(n.v.k_dsp * K - 1.0) < 1e-12);

  SymbolBlock noisy = add_transceiver_noise(tx, 0.2, 4);
  const auto base = normalize_kdsp(noisy, tx);
  const cplx c(1.7, 0.4);
  for (auto* p : {&noisy.h, &noisy.v}) for (auto& x : *p) x *= c;
  const auto scaled = normalize_kdsp(noisy, tx);
  CHECK(std::abs(scaled.h.k_dsp - base.h.k_dsp / c) < 1e-12);
  CHECK(scaled.h.residual == doctest::Approx(base.h.residual).epsilon(1e-9));
}

TEST_CASE("k_dsp rejects a zero-energy block") {
  const SymbolBlock tx = make_symbol_block(16, 3, kRs);
  SymbolBlock zero = tx;
  std::fill(zero.h.begin(), zero.h.end(), cplx{});
  CHECK_THROWS_AS(normalize_kdsp(zero, tx), InvalidArgument);
}
