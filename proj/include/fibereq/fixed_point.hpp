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
#include <vector>

#include "fibereq/train.hpp"

namespace fibereq::fx {

/// Column-major int32 tensor holding round(w * 2^frac_bits).
struct QuantizedTensor {
  int rows = 0;
  int cols = 0;
  std::vector<std::int32_t> data;

  std::int32_t operator()(int r, int c) const {
    return data[static_cast<std::size_t>(c) * static_cast<std::size_t>(rows) +
                static_cast<std::size_t>(r)];
  }
};

struct FixedPointModel {
  nn::Architecture architecture = nn::Architecture::BiLstmCnn;
  nn::ModelDims dims;
  act::ActivationSet activations;
  int frac_bits = 16;
  std::vector<QuantizedTensor> tensors;
};

/// Round-to-nearest (half away from zero) quantization. Throws NumericError
/// when the value does not fit in int32.
std::int32_t quantize_value(double v, int frac_bits);
/// Same, but clamps to the int32 range instead of throwing.
std::int32_t quantize_saturating(double v, int frac_bits);
double dequantize_value(std::int32_t q, int frac_bits);

/// Per-tensor symmetric quantization with a common 2^frac_bits scale.
/// Rejects exact activation bindings (the integer path evaluates
/// approximations only) and reports the largest weight magnitude when a
/// tensor overflows.
FixedPointModel quantize_int32(const nn::EqualizerModel& model, int frac_bits);

/// Floating-point model carrying the dequantized weights.
nn::EqualizerModel dequantize(const FixedPointModel& model);

/// Integer inference of one window (window x features in, n_out x outputs
/// out). Inputs are quantized with saturation; every multiply-accumulate
/// runs in int64 at scale 2^(2 frac_bits) and is rescaled to 2^frac_bits
/// with round-half-up and int32 saturation after each layer or element-wise
/// product. Activations are evaluated on the dequantized pre-activation and
/// the result is re-quantized.
nn::Mat fixed_forward(const FixedPointModel& model, const nn::Mat& window);

nn::Equalized equalize_fixed(const FixedPointModel& model, const nn::SequenceData& data);

}  // namespace fibereq::fx
