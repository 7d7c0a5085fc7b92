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

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fibereq/common.hpp"

namespace fibereq::act {

enum class Function { Tanh, Sigmoid };
enum class Kind { Exact, Taylor, Pwl, Lut };

std::string to_string(Function f);
std::string to_string(Kind k);
Function function_from_string(const std::string& s);
Kind kind_from_string(const std::string& s);

struct ExactParams {};

/// Odd-order Taylor polynomial clamped to the function's saturation values
/// outside [-boundary, boundary].
struct TaylorParams {
  int order = 3;            // highest power, odd, 1..9
  double boundary = 1.0;    // a_t (tanh) or a_sigma (sigmoid)
  std::vector<double> coefficients;  // c_0..c_order, power-series coefficients
};

/// One affine piece y = slope * x + intercept on lo < x <= hi.
struct Segment {
  double lo;
  double hi;
  double slope;
  double intercept;
};

struct PwlParams {
  std::vector<Segment> segments;  // ordered, first lo = -inf, last hi = +inf
};

/// Uniform table over [x_min, x_max): level k sits at x_min + k * step with
/// step = (x_max - x_min) / 2^n_bits.
struct LutParams {
  int n_bits = 8;
  double x_min = -4.0;
  double x_max = 4.0;
  std::vector<double> values;
  std::vector<double> grad_values;

  double step() const { return (x_max - x_min) / static_cast<double>(values.size()); }
  double level(std::size_t k) const { return x_min + step() * static_cast<double>(k); }
  std::size_t index(double x) const;
};

struct ActivationSpec {
  Function function = Function::Tanh;
  std::variant<ExactParams, TaylorParams, PwlParams, LutParams> params;

  Kind kind() const { return static_cast<Kind>(params.index()); }
  /// Short label such as "pwl-3", "taylor-9", "lut-7", "exact".
  std::string label() const;
  void validate() const;
};

// Exact functions and derivatives.
double exact(Function f, double x);
double exact_grad(Function f, double x);

ActivationSpec make_exact(Function f);

/// Power-series coefficients c_0..c_order of tanh or sigmoid truncated at
/// `order`: tanh x = x - x^3/3 + 2x^5/15 - 17x^7/315 + 62x^9/2835,
/// sigma(x) = 1/2 + x/4 - x^3/48 + x^5/480 - 17x^7/80640 + 31x^9/1451520.
std::vector<double> taylor_coefficients(Function f, int order);
ActivationSpec make_taylor(Function f, int order, double boundary);

/// Boundary that minimizes the sup-norm error of the clamped polynomial
/// against the exact function, searched on a 0.05 grid. Used when no
/// model-driven grid search has been run.
double default_taylor_boundary(Function f, int order);

/// The appendix PWL tables as printed (3, 5, 7 or 9 segments).
std::vector<Segment> raw_pwl_table(Function f, int n_segments);

struct RepairLog {
  std::vector<std::string> changes;
};

/// Enforces odd symmetry (tanh) or sigma(-x) = 1 - sigma(x) (sigmoid) and
/// continuity within 1e-3 at every breakpoint with minimal coefficient
/// edits. Throws InvalidArgument when the intervals leave a gap or overlap.
std::vector<Segment> repair_pwl_table(Function f, std::span<const Segment> raw,
                                      RepairLog* log = nullptr);

/// Repaired appendix table wrapped as a spec.
ActivationSpec make_pwl(Function f, int n_segments);
ActivationSpec make_pwl_from_segments(Function f, std::vector<Segment> segments);

/// Default input range of the LUT: [-4, 4) for tanh, [-6, 6) for sigmoid.
std::pair<double, double> default_lut_range(Function f);
ActivationSpec build_lut(Function f, int n_bits, double x_min, double x_max);
ActivationSpec build_lut(Function f, int n_bits);

/// Value of the approximation. Throws InvalidArgument for non-finite x.
double eval(const ActivationSpec& spec, double x);

/// Derivative used for training. At PWL breakpoints the left segment's
/// slope applies; a LUT returns its stored gradient entry for the level
/// that x maps to.
double grad(const ActivationSpec& spec, double x);

/// Element-wise eval/grad over n contiguous values (float or double). The
/// kind dispatch happens once per call.
template <typename T>
void eval_n(const ActivationSpec& spec, const T* x, T* y, std::size_t n);
template <typename T>
void grad_n(const ActivationSpec& spec, const T* x, T* g, std::size_t n);

/// Jump |f(b+) - f(b-)| at each PWL breakpoint.
std::vector<double> pwl_junction_gaps(std::span<const Segment> segments);

/// Picks the candidate with the highest score; ties go to the smaller
/// candidate so the result does not depend on candidate order.
double grid_search_boundary(std::span<const double> candidates,
                            const std::function<double(double)>& score);

/// Default grids: a_t in [0.5, 2.0], a_sigma in [1.0, 4.0], both step 0.05.
std::vector<double> default_boundary_grid(Function f);

/// Pair of activation bindings used by a model.
struct ActivationSet {
  ActivationSpec tanh = make_exact(Function::Tanh);
  ActivationSpec sigmoid = make_exact(Function::Sigmoid);

  bool is_exact() const {
    return tanh.kind() == Kind::Exact && sigmoid.kind() == Kind::Exact;
  }
  std::string label() const;
};

enum class Family { Exact, Taylor, Pwl, Lut };
std::string to_string(Family f);
Family family_from_string(const std::string& s);

/// Both functions approximated with the same family and level (order,
/// segment count or bit width). Taylor boundaries default to
/// default_taylor_boundary.
ActivationSet make_activation_set(Family family, int level);

}  // namespace fibereq::act
