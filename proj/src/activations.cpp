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

#include "fibereq/activations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Core>

namespace fibereq::act {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lower_bound_of(Function f) { return f == Function::Tanh ? -1.0 : 0.0; }
double upper_bound_of(Function) { return 1.0; }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(8);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(Function f) { return f == Function::Tanh ? "tanh" : "sigmoid"; }

std::string to_string(Kind k) {
  switch (k) {
    case Kind::Exact: return "exact";
    case Kind::Taylor: return "taylor";
    case Kind::Pwl: return "pwl";
    case Kind::Lut: return "lut";
  }
  return "?";
}

Function function_from_string(const std::string& s) {
  if (s == "tanh") return Function::Tanh;
  if (s == "sigmoid") return Function::Sigmoid;
  throw InvalidArgument("unknown activation function: " + s);
}

Kind kind_from_string(const std::string& s) {
  if (s == "exact") return Kind::Exact;
  if (s == "taylor") return Kind::Taylor;
  if (s == "pwl") return Kind::Pwl;
  if (s == "lut") return Kind::Lut;
  throw InvalidArgument("unknown activation kind: " + s);
}

std::string to_string(Family f) { return to_string(static_cast<Kind>(f)); }
Family family_from_string(const std::string& s) { return static_cast<Family>(kind_from_string(s)); }

std::size_t LutParams::index(double x) const {
  // Ties between two levels go to the one farther from zero.
  const double pos = (x - x_min) / step();
  const double lower = std::floor(pos);
  const double frac = pos - lower;
  double pick = frac > 0.5 ? lower + 1.0 : lower;
  if (frac == 0.5) {
    const double a = x_min + step() * lower;
    pick = std::abs(a + step()) > std::abs(a) ? lower + 1.0 : lower;
  }
  const double top = static_cast<double>(values.size() - 1);
  return static_cast<std::size_t>(std::clamp(pick, 0.0, top));
}

std::string ActivationSpec::label() const {
  switch (kind()) {
    case Kind::Exact: return "exact";
    case Kind::Taylor: return "taylor-" + std::to_string(std::get<TaylorParams>(params).order);
    case Kind::Pwl:
      return "pwl-" + std::to_string(std::get<PwlParams>(params).segments.size());
    case Kind::Lut: return "lut-" + std::to_string(std::get<LutParams>(params).n_bits);
  }
  return "?";
}

void ActivationSpec::validate() const {
  switch (kind()) {
    case Kind::Exact: break;
    case Kind::Taylor: {
      const auto& p = std::get<TaylorParams>(params);
      require(p.order >= 1 && p.order <= 9 && p.order % 2 == 1, "Taylor order must be odd, 1..9");
      require(p.boundary > 0.0 && std::isfinite(p.boundary), "Taylor boundary must be > 0");
      require(p.coefficients.size() == static_cast<std::size_t>(p.order) + 1,
              "Taylor coefficient count does not match the order");
      break;
    }
    case Kind::Pwl: {
      const auto& s = std::get<PwlParams>(params).segments;
      require(!s.empty(), "PWL table is empty");
      require(s.front().lo == -kInf && s.back().hi == kInf, "PWL table must cover the real line");
      for (std::size_t i = 0; i < s.size(); ++i) {
        require(s[i].lo < s[i].hi, "PWL segment with empty interval");
        require(std::isfinite(s[i].slope) && std::isfinite(s[i].intercept),
                "PWL coefficients must be finite");
        if (i + 1 < s.size()) require(s[i].hi == s[i + 1].lo, "PWL table has a gap or overlap");
      }
      break;
    }
    case Kind::Lut: {
      const auto& p = std::get<LutParams>(params);
      require(p.n_bits >= 2 && p.n_bits <= 16, "LUT bit width must be in 2..16");
      require(p.x_min < p.x_max, "LUT range is empty");
      const std::size_t n = std::size_t{1} << p.n_bits;
      require(p.values.size() == n && p.grad_values.size() == n, "LUT table length must be 2^n_bits");
      break;
    }
  }
}

double exact(Function f, double x) {
  return f == Function::Tanh ? std::tanh(x) : 1.0 / (1.0 + std::exp(-x));
}

double exact_grad(Function f, double x) {
  if (f == Function::Tanh) {
    const double t = std::tanh(x);
    return 1.0 - t * t;
  }
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 - s);
}

ActivationSpec make_exact(Function f) { return ActivationSpec{f, ExactParams{}}; }

std::vector<double> taylor_coefficients(Function f, int order) {
  require(order >= 1 && order <= 9 && order % 2 == 1, "Taylor order must be odd, 1..9");
  std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
  if (f == Function::Tanh) {
    static constexpr double odd[] = {1.0, -1.0 / 3.0, 2.0 / 15.0, -17.0 / 315.0, 62.0 / 2835.0};
    for (int p = 1; p <= order; p += 2) c[p] = odd[p / 2];
  } else {
    static constexpr double odd[] = {1.0 / 4.0, -1.0 / 48.0, 1.0 / 480.0, -17.0 / 80640.0,
                                     31.0 / 1451520.0};
    c[0] = 0.5;
    for (int p = 1; p <= order; p += 2) c[p] = odd[p / 2];
  }
  return c;
}

ActivationSpec make_taylor(Function f, int order, double boundary) {
  ActivationSpec s{f, TaylorParams{order, boundary, taylor_coefficients(f, order)}};
  s.validate();
  return s;
}

std::vector<double> default_boundary_grid(Function f) {
  const double lo = f == Function::Tanh ? 0.5 : 1.0;
  const double hi = f == Function::Tanh ? 2.0 : 4.0;
  std::vector<double> g;
  for (int k = 0;; ++k) {
    const double v = lo + 0.05 * k;
    if (v > hi + 1e-9) break;
    g.push_back(std::round(v * 100.0) / 100.0);
  }
  return g;
}

double default_taylor_boundary(Function f, int order) {
  const auto grid = default_boundary_grid(f);
  const double span = f == Function::Tanh ? 6.0 : 12.0;
  return grid_search_boundary(grid, [&](double a) {
    const ActivationSpec s = make_taylor(f, order, a);
    double worst = 0.0;
    for (int i = 0; i <= 4000; ++i) {
      const double x = -span + 2.0 * span * i / 4000.0;
      worst = std::max(worst, std::abs(eval(s, x) - exact(f, x)));
    }
    return -worst;
  });
}

std::vector<Segment> raw_pwl_table(Function f, int n) {
  // Rows listed from the most negative interval upward.
  auto seg = [](double lo, double hi, double s, double c) { return Segment{lo, hi, s, c}; };
  if (f == Function::Tanh) {
    switch (n) {
      case 3:
        return {seg(-kInf, -1.1, 0, -1), seg(-1.1, 1.1, 0.90909, 0), seg(1.1, kInf, 0, 1)};
      case 5:
        return {seg(-kInf, -1.7, 0, -1), seg(-1.7, -0.5, 0.41666, -0.29166), seg(-0.5, 0.5, 1, 0),
                seg(0.5, 1.7, 0.41666, 0.29166), seg(1.7, kInf, 0, 1)};
      case 7:
        return {seg(-kInf, -1.8, 0, -1),         seg(-1.8, -1.1, 0.285, -0.48699),
                seg(-1.1, -0.4, 0.57214, -0.17114), seg(-0.4, 0.4, 1, 0),
                seg(0.4, 1.1, 0.57214, 0.17114),  seg(1.1, 1.8, 0.285, 0.48699),
                seg(1.8, kInf, 0, 1)};
      case 9:
        return {seg(-kInf, -2.2, 0, -1),           seg(-2.2, -1.4, 0.14331, -0.68417),
                seg(-1.4, -0.9, 0.3381, -0.412),   seg(-0.9, -0.3, 0.269382, -0.09185),
                seg(-0.3, 0.3, 1, 0),              seg(0.3, 0.9, 0.269382, 0.09185),
                seg(0.9, 1.4, 0.3381, 0.412),      seg(1.4, 2.2, 0.14331, 0.68417),
                seg(2.2, kInf, 0, 1)};
      default: break;
    }
  } else {
    switch (n) {
      case 3:
        return {seg(-kInf, -2.2, 0, 0), seg(-2.2, 2.2, 0.22727, 0.5), seg(2.2, kInf, 0, 1)};
      case 5:
        return {seg(-kInf, -2.6, 0, 0),          seg(-2.6, -0.8, 0.17223, 0.44781),
                seg(-0.8, 0.8, 0.23747, 0.5),    seg(0.8, 2.6, 0.17223, 0.55219),
                seg(2.6, kInf, 0, 1)};
      case 7:
        return {seg(-kInf, -3.0, 0, 0),          seg(-3.0, -1.4, 0.12363, 0.37091),
                seg(-1.4, -0.8, 0.18701, 0.45964), seg(-0.8, 0.8, 0.23747, 0.5),
                seg(0.8, 1.4, 0.18701, 0.54036), seg(1.4, 3.0, 0.12363, 0.62909),
                seg(3.0, kInf, 0, 1)};
      case 9:
        return {seg(-kInf, -3.4, 0, 0),            seg(-3.4, -2.0, 0.182242, 0.28949),
                seg(-2.0, -1.5, 0.12644, 0.37209), seg(-1.5, -0.8, 0.08514, 0.45585),
                seg(-0.8, 0.8, 0.23747, 0.5),      seg(0.8, 1.5, 0.182242, 0.09185),
                seg(1.5, 2.0, 0.12644, 0.62791),   seg(2.0, 3.4, 0.08514, 0.71051),
                seg(3.4, kInf, 0, 1)};
      default: break;
    }
  }
  throw InvalidArgument("PWL tables exist for 3, 5, 7 and 9 segments");
}

namespace {

double seg_value(const Segment& s, double x) { return s.slope * x + s.intercept; }

// Value of the segment that, under the mirror relation, maps onto the
// interval mirrored around the origin.
double mirrored_intercept(Function f, double intercept) {
  return f == Function::Tanh ? -intercept : 1.0 - intercept;
}

double junction_gap(const std::vector<Segment>& s, std::size_t i) {
  const double b = s[i].hi;
  return std::abs(seg_value(s[i + 1], b) - seg_value(s[i], b));
}

double total_gap(const std::vector<Segment>& s) {
  double g = 0.0;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) g += junction_gap(s, i);
  return g;
}

void check_tiling(std::span<const Segment> raw) {
  require(!raw.empty(), "PWL table is empty");
  require(raw.front().lo == -kInf && raw.back().hi == kInf, "PWL table must cover the real line");
  for (std::size_t i = 0; i + 1 < raw.size(); ++i) {
    if (raw[i].hi < raw[i + 1].lo) {
      throw InvalidArgument("PWL table has a gap between " + fmt(raw[i].hi) + " and " +
                            fmt(raw[i + 1].lo));
    }
    if (raw[i].hi > raw[i + 1].lo) {
      throw InvalidArgument("PWL table has overlapping intervals at " + fmt(raw[i + 1].lo));
    }
  }
}

std::string describe(const Segment& s) {
  return "(" + fmt(s.lo) + ", " + fmt(s.hi) + "]";
}

}  // namespace

std::vector<Segment> repair_pwl_table(Function f, std::span<const Segment> raw, RepairLog* log) {
  check_tiling(raw);
  std::vector<Segment> s(raw.begin(), raw.end());
  const std::size_t n = s.size();
  for (std::size_t i = 0; i < n; ++i) {
    require(s[i].lo == -s[n - 1 - i].hi || std::abs(s[i].lo + s[n - 1 - i].hi) < 1e-12,
            "PWL breakpoints must be symmetric around zero");
  }
  auto note = [&](const std::string& msg) {
    if (log != nullptr) log->changes.push_back(msg);
  };

  // Mirror symmetry: for each pair, pick the slope/intercept combination
  // (taken from either side) that leaves the smallest total junction gap.
  for (std::size_t j = n - 1; j >= (n + 1) / 2; --j) {
    const std::size_t i = n - 1 - j;
    const double slopes[] = {s[j].slope, s[i].slope};
    const double intercepts[] = {s[j].intercept, mirrored_intercept(f, s[i].intercept)};
    double best_gap = kInf;
    Segment best = s[j];
    for (double slope : slopes) {
      for (double icpt : intercepts) {
        std::vector<Segment> trial = s;
        trial[j].slope = slope;
        trial[j].intercept = icpt;
        trial[i].slope = slope;
        trial[i].intercept = mirrored_intercept(f, icpt);
        const double g = total_gap(trial);
        if (g < best_gap - 1e-15) {
          best_gap = g;
          best = trial[j];
        }
      }
    }
    if (best.slope != s[j].slope || best.intercept != s[j].intercept) {
      note("segment " + describe(s[j]) + ": " + fmt(s[j].slope) + "x+" + fmt(s[j].intercept) +
           " -> " + fmt(best.slope) + "x+" + fmt(best.intercept));
    }
    Segment mirror{s[i].lo, s[i].hi, best.slope, mirrored_intercept(f, best.intercept)};
    // 1 - c is not always exact in binary; keep the printed value then.
    if (std::abs(mirror.intercept - s[i].intercept) < 1e-12) mirror.intercept = s[i].intercept;
    if (mirror.slope != s[i].slope || mirror.intercept != s[i].intercept) {
      note("segment " + describe(s[i]) + ": " + fmt(s[i].slope) + "x+" + fmt(s[i].intercept) +
           " -> " + fmt(mirror.slope) + "x+" + fmt(mirror.intercept) + " (mirror)");
    }
    s[j] = best;
    s[i] = mirror;
  }
  if (n % 2 == 1) {
    Segment& mid = s[n / 2];
    const double centre = f == Function::Tanh ? 0.0 : 0.5;
    if (mid.intercept != centre) {
      note("segment " + describe(mid) + ": intercept " + fmt(mid.intercept) + " -> " + fmt(centre));
      mid.intercept = centre;
    }
  }

  // Continuity: refit the slope (keeping the intercept) of any positive-side
  // segment that still leaves a junction gap, then mirror it.
  constexpr double kTol = 1e-3;
  for (std::size_t j = (n + 1) / 2; j + 1 < n; ++j) {
    const bool left_bad = junction_gap(s, j - 1) >= kTol;
    const bool right_bad = junction_gap(s, j) >= kTol;
    if (!left_bad && !right_bad) continue;
    const double c = s[j].intercept;
    const double y_left = seg_value(s[j - 1], s[j].lo);
    const double y_right = seg_value(s[j + 1], s[j].hi);
    double best_slope = s[j].slope;
    double best_err = kInf;
    for (double slope : {(y_left - c) / s[j].lo, (y_right - c) / s[j].hi}) {
      if (!std::isfinite(slope)) continue;
      const double err = std::max(std::abs(slope * s[j].lo + c - y_left),
                                  std::abs(slope * s[j].hi + c - y_right));
      if (err < best_err) {
        best_err = err;
        best_slope = slope;
      }
    }
    note("segment " + describe(s[j]) + ": slope " + fmt(s[j].slope) + " -> " + fmt(best_slope) +
         " for continuity");
    s[j].slope = best_slope;
    const std::size_t i = n - 1 - j;
    s[i].slope = best_slope;
    s[i].intercept = mirrored_intercept(f, c);
  }
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (junction_gap(s, k) >= kTol) {
      throw InvalidArgument("PWL table cannot be made continuous at " + fmt(s[k].hi));
    }
  }
  return s;
}

ActivationSpec make_pwl_from_segments(Function f, std::vector<Segment> segments) {
  ActivationSpec s{f, PwlParams{std::move(segments)}};
  s.validate();
  return s;
}

ActivationSpec make_pwl(Function f, int n_segments) {
  const auto raw = raw_pwl_table(f, n_segments);
  return make_pwl_from_segments(f, repair_pwl_table(f, raw));
}

std::pair<double, double> default_lut_range(Function f) {
  return f == Function::Tanh ? std::pair{-4.0, 4.0} : std::pair{-6.0, 6.0};
}

ActivationSpec build_lut(Function f, int n_bits, double x_min, double x_max) {
  require(n_bits >= 2 && n_bits <= 16, "LUT bit width must be in 2..16");
  require(x_min < x_max && std::isfinite(x_min) && std::isfinite(x_max), "invalid LUT range");
  LutParams p;
  p.n_bits = n_bits;
  p.x_min = x_min;
  p.x_max = x_max;
  const std::size_t n = std::size_t{1} << n_bits;
  p.values.resize(n);
  p.grad_values.resize(n);
  const double step = (x_max - x_min) / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double x = x_min + step * static_cast<double>(k);
    p.values[k] = exact(f, x);
    p.grad_values[k] = exact_grad(f, x);
  }
  return ActivationSpec{f, std::move(p)};
}

ActivationSpec build_lut(Function f, int n_bits) {
  const auto [lo, hi] = default_lut_range(f);
  return build_lut(f, n_bits, lo, hi);
}

namespace {

double taylor_eval(const TaylorParams& p, Function f, double x) {
  if (x > p.boundary) return upper_bound_of(f);
  if (x < -p.boundary) return lower_bound_of(f);
  double y = 0.0;
  for (int k = p.order; k >= 0; --k) y = y * x + p.coefficients[k];
  return std::clamp(y, lower_bound_of(f), upper_bound_of(f));
}

double taylor_grad(const TaylorParams& p, Function f, double x) {
  if (x > p.boundary || x < -p.boundary) return 0.0;
  double y = 0.0;
  for (int k = p.order; k >= 0; --k) y = y * x + p.coefficients[k];
  if (y > upper_bound_of(f) || y < lower_bound_of(f)) return 0.0;
  double d = 0.0;
  for (int k = p.order; k >= 1; --k) d = d * x + k * p.coefficients[k];
  return d;
}

const Segment& find_segment(const std::vector<Segment>& segs, double x) {
  // Intervals are (lo, hi]; the first one whose hi >= x holds x.
  auto it = std::lower_bound(segs.begin(), segs.end(), x,
                             [](const Segment& s, double v) { return s.hi < v; });
  return it == segs.end() ? segs.back() : *it;
}

}  // namespace

double eval(const ActivationSpec& spec, double x) {
  if (!std::isfinite(x)) throw InvalidArgument("activation input is not finite");
  switch (spec.kind()) {
    case Kind::Exact: return exact(spec.function, x);
    case Kind::Taylor: return taylor_eval(std::get<TaylorParams>(spec.params), spec.function, x);
    case Kind::Pwl: {
      const Segment& s = find_segment(std::get<PwlParams>(spec.params).segments, x);
      return s.slope * x + s.intercept;
    }
    case Kind::Lut: {
      const auto& p = std::get<LutParams>(spec.params);
      return p.values[p.index(x)];
    }
  }
  return 0.0;
}

double grad(const ActivationSpec& spec, double x) {
  switch (spec.kind()) {
    case Kind::Exact: return exact_grad(spec.function, x);
    case Kind::Taylor: return taylor_grad(std::get<TaylorParams>(spec.params), spec.function, x);
    case Kind::Pwl: return find_segment(std::get<PwlParams>(spec.params).segments, x).slope;
    case Kind::Lut: {
      const auto& p = std::get<LutParams>(spec.params);
      return p.grad_values[p.index(x)];
    }
  }
  return 0.0;
}

template <typename T>
void eval_n(const ActivationSpec& spec, const T* x, T* y, std::size_t n) {
  switch (spec.kind()) {
    case Kind::Exact: {
      const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> xm(x, static_cast<Eigen::Index>(n));
      Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> ym(y, static_cast<Eigen::Index>(n));
      if (spec.function == Function::Tanh) {
        ym = xm.tanh();
      } else {
        ym = xm.logistic();
      }
      return;
    }
    case Kind::Taylor: {
      const auto& p = std::get<TaylorParams>(spec.params);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<T>(taylor_eval(p, spec.function, static_cast<double>(x[i])));
      }
      return;
    }
    case Kind::Pwl: {
      const auto& segs = std::get<PwlParams>(spec.params).segments;
      for (std::size_t i = 0; i < n; ++i) {
        const Segment& s = find_segment(segs, static_cast<double>(x[i]));
        y[i] = static_cast<T>(s.slope * static_cast<double>(x[i]) + s.intercept);
      }
      return;
    }
    case Kind::Lut: {
      const auto& p = std::get<LutParams>(spec.params);
      for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<T>(p.values[p.index(x[i])]);
      return;
    }
  }
}

template <typename T>
void grad_n(const ActivationSpec& spec, const T* x, T* g, std::size_t n) {
  if (spec.kind() == Kind::Exact) {
    const Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> xm(x, static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> gm(g, static_cast<Eigen::Index>(n));
    if (spec.function == Function::Tanh) {
      gm = T(1) - xm.tanh().square();
    } else {
      gm = xm.logistic() * (T(1) - xm.logistic());
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<T>(grad(spec, static_cast<double>(x[i])));
}

template void eval_n<float>(const ActivationSpec&, const float*, float*, std::size_t);
template void eval_n<double>(const ActivationSpec&, const double*, double*, std::size_t);
template void grad_n<float>(const ActivationSpec&, const float*, float*, std::size_t);
template void grad_n<double>(const ActivationSpec&, const double*, double*, std::size_t);

std::vector<double> pwl_junction_gaps(std::span<const Segment> segments) {
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) {
    const double b = segments[i].hi;
    gaps.push_back(std::abs(seg_value(segments[i + 1], b) - seg_value(segments[i], b)));
  }
  return gaps;
}

double grid_search_boundary(std::span<const double> candidates,
                            const std::function<double(double)>& score) {
  require(!candidates.empty(), "boundary grid is empty");
  double best = candidates[0];
  double best_score = -kInf;
  bool first = true;
  for (double c : candidates) {
    const double sc = score(c);
    if (first || sc > best_score || (sc == best_score && c < best)) {
      best = c;
      best_score = sc;
      first = false;
    }
  }
  return best;
}

std::string ActivationSet::label() const {
  if (tanh.label() == sigmoid.label()) return tanh.label();
  return "tanh:" + tanh.label() + "/sigmoid:" + sigmoid.label();
}

ActivationSet make_activation_set(Family family, int level) {
  ActivationSet s;
  switch (family) {
    case Family::Exact: break;
    case Family::Taylor:
      s.tanh = make_taylor(Function::Tanh, level, default_taylor_boundary(Function::Tanh, level));
      s.sigmoid = make_taylor(Function::Sigmoid, level,
                              default_taylor_boundary(Function::Sigmoid, level));
      break;
    case Family::Pwl:
      s.tanh = make_pwl(Function::Tanh, level);
      s.sigmoid = make_pwl(Function::Sigmoid, level);
      break;
    case Family::Lut:
      s.tanh = build_lut(Function::Tanh, level);
      s.sigmoid = build_lut(Function::Sigmoid, level);
      break;
  }
  return s;
}

}  // namespace fibereq::act
