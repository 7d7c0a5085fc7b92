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

#include <algorithm>
#include <random>

#include "fibereq/activations.hpp"

using namespace fibereq;
using namespace fibereq::act;

namespace {

std::vector<ActivationSpec> all_specs() {
  std::vector<ActivationSpec> v;
  for (Function f : {Function::Tanh, Function::Sigmoid}) {
    v.push_back(make_exact(f));
    for (int o : {1, 3, 5, 7, 9}) v.push_back(make_taylor(f, o, default_taylor_boundary(f, o)));
    for (int n : {3, 5, 7, 9}) v.push_back(make_pwl(f, n));
    for (int b : {2, 3, 4, 6, 8, 12, 16}) v.push_back(build_lut(f, b));
  }
  return v;
}

std::vector<double> dense_grid(double lo, double hi, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return x;
}

double taylor_sup_error(Function f, int order, double a) {
  const ActivationSpec s = make_taylor(f, order, a);
  double worst = 0.0;
  for (double x : dense_grid(-a, a, 4001)) worst = std::max(worst, std::abs(eval(s, x) - exact(f, x)));
  return worst;
}

}  // namespace

TEST_CASE("three-segment PWL tanh values and slope") {
  const ActivationSpec s = make_pwl(Function::Tanh, 3);
  CHECK(eval(s, 0.5) == doctest::Approx(0.454545).epsilon(1e-6));
  CHECK(grad(s, 0.0) == doctest::Approx(0.90909).epsilon(1e-12));
  CHECK(eval(s, 5.0) == 1.0);
  CHECK(eval(s, -5.0) == -1.0);
}

TEST_CASE("third-order Taylor tanh at one") {
  const ActivationSpec s = make_taylor(Function::Tanh, 3, 1.15);
  CHECK(eval(s, 1.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(grad(s, 2.0) == 0.0);
  CHECK(grad(s, -2.0) == 0.0);
  CHECK(eval(s, 2.0) == 1.0);
}

TEST_CASE("Taylor coefficients are the truncated power series") {
  const auto t = taylor_coefficients(Function::Tanh, 9);
  const std::vector<double> tanh_ref{0, 1, 0, -1.0 / 3, 0, 2.0 / 15, 0, -17.0 / 315, 0, 62.0 / 2835};
  REQUIRE(t.size() == tanh_ref.size());
  for (std::size_t k = 0; k < t.size(); ++k) CHECK(t[k] == doctest::Approx(tanh_ref[k]).epsilon(1e-15));
  const auto s = taylor_coefficients(Function::Sigmoid, 9);
  const std::vector<double> sig_ref{0.5, 0.25, 0, -1.0 / 48, 0, 1.0 / 480, 0, -17.0 / 80640, 0, 31.0 / 1451520};
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(s[k] == doctest::Approx(sig_ref[k]).epsilon(1e-15));
}

TEST_CASE("every approximation is centered at the origin") {
  for (const auto& s : all_specs()) {
    CAPTURE(s.label());
    const double y = eval(s, 0.0);
    if (s.function == Function::Tanh) {
      CHECK(std::abs(y) < 1e-12);
    } else {
      CHECK(std::abs(y - 0.5) < 1e-12);
    }
  }
}

TEST_CASE("exact derivatives") {
  CHECK(exact_grad(Function::Tanh, 0.0) == 1.0);
  CHECK(exact_grad(Function::Sigmoid, 0.0) == 0.25);
  CHECK(grad(make_exact(Function::Tanh), 0.0) == 1.0);
}

TEST_CASE("outputs stay in the function range and PWL/LUT are monotone") {
  const auto xs = dense_grid(-10.0, 10.0, 20001);
  for (const auto& s : all_specs()) {
    CAPTURE(s.label());
    const double lo = s.function == Function::Tanh ? -1.0 : 0.0;
    bool in_range = true;
    for (double x : xs) {
      const double y = eval(s, x);
      in_range = in_range && y >= lo && y <= 1.0;
    }
    CHECK(in_range);
    if (s.kind() == Kind::Lut) {
      double prev = -1.0;
      for (double x : xs) {
        CHECK(eval(s, x) >= prev);
        prev = eval(s, x);
      }
    }
    if (s.kind() == Kind::Pwl) {
      // Nondecreasing inside every segment; across a breakpoint the printed
      // tables may step down by less than the continuity tolerance.
      const auto& seg = std::get<PwlParams>(s.params).segments;
      for (const auto& g : seg) CHECK(g.slope >= 0.0);
      for (std::size_t i = 0; i + 1 < seg.size(); ++i) {
        const double b = seg[i].hi;
        CHECK(seg[i + 1].slope * b + seg[i + 1].intercept - (seg[i].slope * b + seg[i].intercept) > -1e-3);
      }
    }
  }
}

TEST_CASE("Taylor error shrinks with the order") {
  for (Function f : {Function::Tanh, Function::Sigmoid}) {
    const double a = f == Function::Tanh ? 1.0 : 2.0;
    double prev = std::numeric_limits<double>::infinity();
    for (int o : {3, 5, 7, 9}) {
      const double e = taylor_sup_error(f, o, a);
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("default Taylor boundary minimizes the sup error on its grid") {
  for (Function f : {Function::Tanh, Function::Sigmoid}) {
    for (int o : {3, 5, 7, 9}) {
      const ActivationSpec probe = make_taylor(f, o, 1.0);
      (void)probe;
      // Sup error of the clamped polynomial over the whole line.
      auto sup = [&](double a) {
        const ActivationSpec s = make_taylor(f, o, a);
        double w = 0.0;
        for (double x : dense_grid(-8.0, 8.0, 8001)) w = std::max(w, std::abs(eval(s, x) - exact(f, x)));
        return w;
      };
      const auto grid = default_boundary_grid(f);
      double best = grid.front(), best_err = sup(best);
      for (double a : grid) {
        const double e = sup(a);
        if (e < best_err - 1e-12) {
          best = a;
          best_err = e;
        }
      }
      CAPTURE(o);
      CHECK(default_taylor_boundary(f, o) == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("analytic gradients match finite differences away from breakpoints") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (const auto& s : all_specs()) {
    if (s.kind() == Kind::Lut) continue;
    CAPTURE(s.label());
    std::vector<double> breaks;
    if (s.kind() == Kind::Pwl) {
      for (const auto& g : std::get<PwlParams>(s.params).segments) breaks.push_back(g.hi);
    } else if (s.kind() == Kind::Taylor) {
      const double a = std::get<TaylorParams>(s.params).boundary;
      breaks = {-a, a};
    }
    for (int i = 0; i < 400; ++i) {
      const double x = u(rng);
      const double h = 1e-6;
      bool near = false;
      for (double b : breaks) near = near || std::abs(x - b) < 10 * h;
      if (near) continue;
      const double fd = (eval(s, x + h) - eval(s, x - h)) / (2 * h);
      const double g = grad(s, x);
      if (std::abs(g) < 1e-9) {
        CHECK(std::abs(fd) < 1e-7);
      } else {
        CHECK(std::abs(fd - g) / std::abs(g) < 1e-6);
      }
    }
  }
}

TEST_CASE("PWL gradient at a breakpoint uses the left segment") {
  const ActivationSpec s = make_pwl(Function::Tanh, 5);
  CHECK(grad(s, 0.5) == 1.0);
  CHECK(grad(s, 0.5000001) == doctest::Approx(0.41666));
}

TEST_CASE("LUT levels, values and stored gradients") {
  const ActivationSpec s = build_lut(Function::Tanh, 2, -2.0, 2.0);
  const auto& p = std::get<LutParams>(s.params);
  REQUIRE(p.values.size() == 4);
  const std::vector<double> levels{-2, -1, 0, 1};
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(p.level(k) == levels[k]);
    CHECK(p.values[k] == std::tanh(levels[k]));
    CHECK(p.grad_values[k] == doctest::Approx(1.0 - std::tanh(levels[k]) * std::tanh(levels[k])));
  }
  CHECK(p.values[0] == exact(Function::Tanh, p.x_min));

  const ActivationSpec four = build_lut(Function::Tanh, 4);
  const auto& q = std::get<LutParams>(four.params);
  CHECK(q.values.size() == 16);
  CHECK(std::is_sorted(q.values.begin(), q.values.end()));

  // Gradients come from the table for the level the input maps to.
  for (double x : dense_grid(-6.0, 6.0, 997)) CHECK(grad(four, x) == q.grad_values[q.index(x)]);
}

TEST_CASE("LUT nearest-level lookup rounds half away from zero and clamps") {
  const ActivationSpec s = build_lut(Function::Tanh, 2, -2.0, 2.0);
  const auto& p = std::get<LutParams>(s.params);
  CHECK(p.index(-0.49) == 2);
  CHECK(p.index(0.5) == 3);
  CHECK(p.index(-0.5) == 1);
  CHECK(p.index(-50.0) == 0);
  CHECK(p.index(50.0) == 3);
}

TEST_CASE("LUT error bound holds on dense samples") {
  for (Function f : {Function::Tanh, Function::Sigmoid}) {
    for (int b : {2, 4, 6, 8, 10, 12, 14, 16}) {
      const ActivationSpec s = build_lut(f, b);
      const auto& p = std::get<LutParams>(s.params);
      const double max_slope = f == Function::Tanh ? 1.0 : 0.25;
      const double bound = max_slope * p.step() / 2.0 + 1e-15;
      double worst = 0.0;
      for (double x : dense_grid(p.x_min, p.x_max - p.step() / 2.0, 50001)) {
        worst = std::max(worst, std::abs(eval(s, x) - exact(f, x)));
      }
      CAPTURE(b);
      CHECK(worst <= bound);
    }
  }
}

TEST_CASE("LUT rejects invalid widths and ranges") {
  CHECK_THROWS_AS(build_lut(Function::Tanh, 1), InvalidArgument);
  CHECK_THROWS_AS(build_lut(Function::Tanh, 17), InvalidArgument);
  CHECK_THROWS_AS(build_lut(Function::Tanh, 4, 1.0, 1.0), InvalidArgument);
}

TEST_CASE("non-finite inputs are rejected") {
  CHECK_THROWS_AS(eval(make_pwl(Function::Tanh, 3), std::nan("")), InvalidArgument);
  CHECK_THROWS_AS(eval(make_exact(Function::Sigmoid), std::numeric_limits<double>::infinity()),
                  InvalidArgument);
}

TEST_CASE("short tanh tables need no repair") {
  for (int n : {3, 5, 7}) {
    RepairLog log;
    const auto raw = raw_pwl_table(Function::Tanh, n);
    const auto fixed = repair_pwl_table(Function::Tanh, raw, &log);
    CAPTURE(n);
    CHECK(log.changes.empty());
    REQUIRE(fixed.size() == raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      CHECK(fixed[i].slope == raw[i].slope);
      CHECK(fixed[i].intercept == raw[i].intercept);
    }
  }
}

TEST_CASE("nine-segment tanh slope is corrected for continuity") {
  RepairLog log;
  const auto fixed = repair_pwl_table(Function::Tanh, raw_pwl_table(Function::Tanh, 9), &log);
  CHECK(!log.changes.empty());
  const Segment& s = fixed[5];  // (0.3, 0.9]
  REQUIRE(s.lo == 0.3);
  CHECK(s.slope == doctest::Approx(0.69382).epsilon(1e-4));
  CHECK(s.slope * 0.9 + s.intercept == doctest::Approx(0.3381 * 0.9 + 0.412).epsilon(1e-6));
  CHECK(fixed[3].slope == s.slope);
}

TEST_CASE("repaired tables are continuous and symmetric") {
  for (Function f : {Function::Tanh, Function::Sigmoid}) {
    for (int n : {3, 5, 7, 9}) {
      const ActivationSpec s = make_pwl(f, n);
      const auto& seg = std::get<PwlParams>(s.params).segments;
      CAPTURE(n);
      for (double g : pwl_junction_gaps(seg)) CHECK(g < 1e-3);
      // Intervals are half-open, so at a breakpoint the mirror image lands
      // on the neighboring segment; there symmetry holds up to the gap.
      for (double x : dense_grid(-5.0, 5.0, 1001)) {
        bool at_break = false;
        for (const auto& g : seg) at_break = at_break || std::abs(std::abs(x) - std::abs(g.hi)) < 1e-9;
        const double tol = at_break ? 1e-3 : 1e-12;
        const double mirror = f == Function::Tanh ? -eval(s, x) : 1.0 - eval(s, x);
        CHECK(std::abs(eval(s, -x) - mirror) < tol);
      }
    }
  }
}

TEST_CASE("repaired nine-segment sigmoid tracks the exact function") {
  const ActivationSpec s = make_pwl(Function::Sigmoid, 9);
  double worst = 0.0;
  for (double x : dense_grid(-8.0, 8.0, 16001)) worst = std::max(worst, std::abs(eval(s, x) - exact(Function::Sigmoid, x)));
  CHECK(worst < 0.05);
  const auto& seg = std::get<PwlParams>(s.params).segments;
  for (std::size_t i = 0; i < seg.size(); ++i) CHECK(seg[i].slope == seg[seg.size() - 1 - i].slope);
}

TEST_CASE("repair rejects tables with gaps") {
  auto raw = raw_pwl_table(Function::Tanh, 3);
  raw[1].hi = 1.0;
  CHECK_THROWS_AS(repair_pwl_table(Function::Tanh, raw), InvalidArgument);
}

TEST_CASE("boundary grid search picks the best candidate independent of order") {
  auto score = [](double a) { return -(a - 1.3) * (a - 1.3); };
  const std::vector<double> one{0.7};
  CHECK(grid_search_boundary(one, score) == 0.7);
  std::vector<double> grid = default_boundary_grid(Function::Tanh);
  const double sorted = grid_search_boundary(grid, score);
  std::mt19937 rng(1);
  std::shuffle(grid.begin(), grid.end(), rng);
  CHECK(grid_search_boundary(grid, score) == sorted);
  for (double a : grid) CHECK(score(sorted) >= score(a));
  CHECK(sorted == doctest::Approx(1.3));
  // Ties resolve to the smaller candidate.
  const std::vector<double> tie{2.0, 1.0};
  CHECK(grid_search_boundary(tie, [](double) { return 0.0; }) == 1.0);
}

TEST_CASE("activation parameter validation") {
  ActivationSpec s = make_taylor(Function::Tanh, 3, 1.0);
  std::get<TaylorParams>(s.params).order = 4;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  CHECK_THROWS_AS(make_taylor(Function::Tanh, 11, 1.0), InvalidArgument);
  CHECK_THROWS_AS(make_pwl(Function::Tanh, 4), InvalidArgument);
}

TEST_CASE("batched evaluation agrees with scalar evaluation") {
  const auto xs = dense_grid(-7.0, 7.0, 513);
  for (const auto& s : all_specs()) {
    std::vector<double> y(xs.size()), g(xs.size());
    eval_n(s, xs.data(), y.data(), xs.size());
    grad_n(s, xs.data(), g.data(), xs.size());
    std::vector<float> xf(xs.begin(), xs.end()), yf(xs.size());
    eval_n(s, xf.data(), yf.data(), xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(y[i] == doctest::Approx(eval(s, xs[i])).epsilon(1e-14));
      CHECK(g[i] == doctest::Approx(grad(s, xs[i])).epsilon(1e-14));
      CHECK(std::abs(yf[i] - eval(s, xs[i])) < 1e-5);
    }
  }
}

TEST_CASE("activation sets and labels") {
  const ActivationSet a = make_activation_set(Family::Pwl, 3);
  CHECK(a.tanh.label() == "pwl-3");
  CHECK(a.sigmoid.function == Function::Sigmoid);
  CHECK(!a.is_exact());
  CHECK(make_activation_set(Family::Exact, 0).is_exact());
  CHECK(family_from_string(to_string(Family::Lut)) == Family::Lut);
  CHECK_THROWS_AS(family_from_string("cordic"), InvalidArgument);
}
