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

#include "fibereq/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace fibereq {

namespace {
// FFTW planning is not thread safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  require(n > 0, "FFT length must be positive");
  CVec scratch(n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  alignment_ = fftw_alignment_of(reinterpret_cast<double*>(scratch.data()));
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  if (fwd_) fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  if (inv_) fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

Fft::Fft(Fft&& other) noexcept
    : n_(other.n_), fwd_(other.fwd_), inv_(other.inv_), alignment_(other.alignment_) {
  other.fwd_ = other.inv_ = nullptr;
}

Fft& Fft::operator=(Fft&& other) noexcept {
  std::swap(n_, other.n_);
  std::swap(fwd_, other.fwd_);
  std::swap(inv_, other.inv_);
  std::swap(alignment_, other.alignment_);
  return *this;
}

void Fft::execute(void* plan, std::span<cplx> data) const {
  require(data.size() == n_, "FFT length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  if (fftw_alignment_of(reinterpret_cast<double*>(data.data())) == alignment_) {
    fftw_execute_dft(static_cast<fftw_plan>(plan), p, p);
    return;
  }
  CVec tmp(data.begin(), data.end());
  if (fftw_alignment_of(reinterpret_cast<double*>(tmp.data())) != alignment_) {
    throw Error("FFT buffer alignment mismatch");
  }
  auto* t = reinterpret_cast<fftw_complex*>(tmp.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan), t, t);
  std::copy(tmp.begin(), tmp.end(), data.begin());
}

void Fft::forward(std::span<cplx> data) const { execute(fwd_, data); }

void Fft::inverse(std::span<cplx> data) const {
  execute(inv_, data);
  const double scale = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= scale;
}

CVec circular_filter(std::span<const cplx> x, std::span<const cplx> taps) {
  const std::size_t n = x.size();
  require(taps.size() % 2 == 1, "FIR tap count must be odd");
  if (n == 0) return {};
  const std::size_t half = taps.size() / 2;
  if (taps.size() == 1) {
    CVec y(x.begin(), x.end());
    for (auto& v : y) v *= taps[0];
    return y;
  }
  // Taps longer than the signal wrap around modulo n.
  CVec h(n, cplx{0.0, 0.0});
  for (std::size_t k = 0; k < taps.size(); ++k) {
    const long lag = static_cast<long>(k) - static_cast<long>(half);
    const long idx = ((lag % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n);
    h[static_cast<std::size_t>(idx)] += taps[k];
  }
  Fft fft(n);
  CVec y(x.begin(), x.end());
  fft.forward(y);
  fft.forward(h);
  for (std::size_t k = 0; k < n; ++k) y[k] *= h[k];
  fft.inverse(y);
  return y;
}

}  // namespace fibereq
