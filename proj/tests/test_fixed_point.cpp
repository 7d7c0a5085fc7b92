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

#include <random>

#include "fibereq/fixed_point.hpp"
#include "test_util.hpp"

using namespace fibereq;
using namespace fibereq::nn;
using fibereq::test::random_mat;

namespace {

EqualizerModel pwl_model(Architecture arch, std::uint64_t seed) {
  EqualizerModel m = EqualizerModel::create(arch, ModelDims{}, seed);
  m.activations = act::make_activation_set(act::Family::Pwl, 3);
  return m;
}

}  // namespace

TEST_CASE("scalar quantization rounds to nearest, half away from zero") {
  CHECK(fx::quantize_value(1.0, 16) == 65536);
  CHECK(fx::quantize_value(-1.0, 16) == -65536);
  CHECK(fx::quantize_value(0.5 / 65536.0, 16) == 1);
  CHECK(fx::quantize_value(-0.5 / 65536.0, 16) == -1);
  CHECK(fx::quantize_value(0.49 / 65536.0, 16) == 0);
  CHECK_THROWS_AS(fx::quantize_value(40000.0, 16), NumericError);
  CHECK(fx::quantize_saturating(40000.0, 16) == std::numeric_limits<std::int32_t>::max());
  CHECK(fx::quantize_saturating(-40000.0, 16) == std::numeric_limits<std::int32_t>::min());
}

TEST_CASE("dequantize after quantize is within the rounding bound") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1000.0, 1000.0);
  for (int frac : {4, 10, 16}) {
    const double bound = std::ldexp(1.0, -frac);
    for (int i = 0; i < 10000; ++i) {
      const double v = u(rng);
      CHECK(std::abs(fx::dequantize_value(fx::quantize_value(v, frac), frac) - v) <= bound);
    }
  }
}

TEST_CASE("model quantization keeps tensor shapes and bounded error") {
  const EqualizerModel m = pwl_model(Architecture::BiLstmCnn, 1);
  const fx::FixedPointModel q = fx::quantize_int32(m, 16);
  REQUIRE(q.tensors.size() == m.tensors.size());
  const EqualizerModel back = fx::dequantize(q);
  for (std::size_t t = 0; t < m.tensors.size(); ++t) {
    CHECK(q.tensors[t].rows == m.tensors[t].rows());
    CHECK(q.tensors[t].cols == m.tensors[t].cols());
    CHECK((back.tensors[t] - m.tensors[t]).cwiseAbs().maxCoeff() <= std::ldexp(1.0, -16));
    CHECK(q.tensors[t](0, 0) == fx::quantize_value(m.tensors[t](0, 0), 16));
  }
}

TEST_CASE("quantization rejects exact activations, bad widths and overflow") {
  EqualizerModel m = EqualizerModel::create(Architecture::BiLstmCnn, ModelDims{}, 1);
  CHECK_THROWS_AS(fx::quantize_int32(m, 16), InvalidArgument);
  m.activations = act::make_activation_set(act::Family::Pwl, 3);
  CHECK_THROWS_AS(fx::quantize_int32(m, 0), InvalidArgument);
  CHECK_THROWS_AS(fx::quantize_int32(m, 31), InvalidArgument);
  m.tensors[2](0, 0) = 1e6;
  try {
    fx::quantize_int32(m, 16);
    FAIL("overflow not reported");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("fwd.b") != std::string::npos);
  }
}

TEST_CASE("integer inference tracks float inference at 16 fractional bits") {
  for (Architecture arch : {Architecture::BiLstmCnn, Architecture::DeepCnn}) {
    const EqualizerModel m = pwl_model(arch, 3);
    const fx::FixedPointModel q = fx::quantize_int32(m, 16);
    for (std::uint64_t s = 0; s < 4; ++s) {
      const Mat w = random_mat(81, 4, 10 + s, 1.2);
      const Mat a = fixed_forward(q, w);
      const Mat b = forward(m, w);
      REQUIRE(a.rows() == 61);
      CAPTURE(to_string(arch));
      CHECK((a - b).cwiseAbs().maxCoeff() < 1e-3);
    }
  }
}

TEST_CASE("integer inference with taylor and LUT bindings") {
  for (act::Family fam : {act::Family::Taylor, act::Family::Lut}) {
    EqualizerModel m = EqualizerModel::create(Architecture::DeepCnn, ModelDims{}, 5);
    m.activations = act::make_activation_set(fam, fam == act::Family::Lut ? 12 : 9);
    const fx::FixedPointModel q = fx::quantize_int32(m, 16);
    const Mat w = random_mat(81, 4, 9, 1.0);
    // LUT steps can flip on rounding; compare the bulk.
    const Mat diff = (fixed_forward(q, w) - forward(m, w)).cwiseAbs();
    CHECK(diff.mean() < 1e-3);
  }
}

TEST_CASE("coarse fractional widths lose accuracy") {
  const EqualizerModel m = pwl_model(Architecture::DeepCnn, 3);
  const Mat w = random_mat(81, 4, 2, 1.0);
  const double fine = (fixed_forward(fx::quantize_int32(m, 20), w) - forward(m, w)).cwiseAbs().maxCoeff();
  const double coarse = (fixed_forward(fx::quantize_int32(m, 6), w) - forward(m, w)).cwiseAbs().maxCoeff();
  CHECK(coarse > fine);
}

TEST_CASE("fixed-point sequence equalization matches per-window inference") {
  const EqualizerModel m = pwl_model(Architecture::DeepCnn, 8);
  const fx::FixedPointModel q = fx::quantize_int32(m, 16);
  SequenceData data;
  data.features = random_mat(4, 81 + 61 * 3, 4, 1.0);
  data.targets = Mat::Zero(2, data.features.cols());
  data.bits_h.assign(static_cast<std::size_t>(4 * data.features.cols()), 0);
  const Equalized eq = fx::equalize_fixed(q, data);
  CHECK(eq.first == 10);
  REQUIRE(eq.symbols.size() == 61 * 4);
  for (int w = 0; w < 4; ++w) {
    const Mat y = fixed_forward(q, data.features.block(0, 61 * w, 4, 81).transpose());
    for (int t = 0; t < 61; ++t) {
      const cplx got = eq.symbols[static_cast<std::size_t>(61 * w + t)];
      CHECK(got == cplx(y(t, 0), y(t, 1)));
    }
  }
}
