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

#include <span>

#include "fibereq/common.hpp"

namespace fibereq {

// In-place complex FFT of a fixed length, backed by FFTW. Forward uses the
// e^{-j w t} kernel; inverse is normalized by 1/n so inverse(forward(x)) == x.
// Plans are built with FFTW_ESTIMATE so results are reproducible run to run.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;
  Fft(Fft&& other) noexcept;
  Fft& operator=(Fft&& other) noexcept;

  std::size_t size() const { return n_; }
  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;

 private:
  void execute(void* plan, std::span<cplx> data) const;

  std::size_t n_ = 0;
  void* fwd_ = nullptr;
  void* inv_ = nullptr;
  int alignment_ = 0;
};

// Angular frequency (rad/s) of FFT bin k for an n-point transform at fs.
inline double fft_omega(std::size_t k, std::size_t n, double fs) {
  const double kk = k < (n + 1) / 2 ? static_cast<double>(k)
                                    : static_cast<double>(k) - static_cast<double>(n);
  return 2.0 * kPi * kk * fs / static_cast<double>(n);
}

// Circular convolution of x with an odd-length FIR centered on its middle tap
// (zero group delay). Equivalent to direct time-domain filtering with a
// periodic boundary.
CVec circular_filter(std::span<const cplx> x, std::span<const cplx> taps);

}  // namespace fibereq
