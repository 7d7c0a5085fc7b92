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

#include "fibereq/metrics.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "fibereq/csv.hpp"

namespace fibereq {

namespace {

// Acklam, inverse of the standard normal CDF.
double normal_quantile(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log(1.0 - p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double erfc_inv(double z) {
  require(z > 0.0 && z < 2.0, "erfc_inv argument must lie in (0, 2)");
  double x = -normal_quantile(z / 2.0) / std::sqrt(2.0);
  const double deriv = -2.0 / std::sqrt(kPi) * std::exp(-x * x);
  x -= (std::erfc(x) - z) / deriv;
  return x;
}

double ber(std::span<const cplx> predicted, std::span<const std::uint8_t> reference_bits) {
  require(predicted.size() * kBitsPerSymbol == reference_bits.size(),
          "symbol and bit counts do not match");
  require(!predicted.empty(), "empty block");
  const Bits decided = demap_16qam(predicted);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < decided.size(); ++i) errors += decided[i] != (reference_bits[i] & 1u);
  return static_cast<double>(errors) / static_cast<double>(decided.size());
}

bool q_factor_in_range(double b) { return b > 0.0 && b < 0.5; }

double q_factor(double b) {
  if (std::isnan(b)) return std::numeric_limits<double>::quiet_NaN();
  if (b <= 0.0) return std::numeric_limits<double>::infinity();
  if (b >= 0.5) return -std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(std::sqrt(2.0) * erfc_inv(2.0 * b));
}

double ber_from_q(double q_db) {
  const double q_lin = std::pow(10.0, q_db / 20.0);
  return 0.5 * std::erfc(q_lin / std::sqrt(2.0));
}

double throughput(double clock_hz, int qam_order, int n_out) {
  require(qam_order >= 2 && (qam_order & (qam_order - 1)) == 0, "QAM order must be a power of two");
  require(n_out >= 0, "n_out must be >= 0");
  return clock_hz * std::log2(static_cast<double>(qam_order)) * n_out;
}

double n_fpga(double t_target_bps, double t_achieved_bps, double utilization) {
  return t_target_bps / t_achieved_bps * utilization;
}

std::string MetricsReport::csv_header() {
  return "label,ber,q_db,n_real_mults_per_symbol,throughput_gbps,n_fpga,utilization,clock_mhz";
}

std::string MetricsReport::to_csv_row() const {
  return label + "," + format_double(ber) + "," + format_double(q_db) + "," +
         std::to_string(n_real_mults_per_symbol) + "," + format_double(throughput_gbps) + "," +
         format_double(n_fpga) + "," + format_double(utilization) + "," + format_double(clock_mhz);
}

std::string MetricsReport::to_json_line() const {
  nlohmann::json j;
  j["label"] = label;
  j["ber"] = ber;
  // JSON has no infinity; saturated Q values are written as null.
  j["q_db"] = std::isfinite(q_db) ? nlohmann::json(q_db) : nlohmann::json(nullptr);
  j["n_real_mults_per_symbol"] = n_real_mults_per_symbol;
  j["throughput_gbps"] = throughput_gbps;
  j["n_fpga"] = n_fpga;
  j["utilization"] = utilization;
  j["clock_mhz"] = clock_mhz;
  return j.dump();
}

bool ResourceReport::any_mismatch() const {
  for (const auto& c : cells) {
    if (c.mismatch) return true;
  }
  return false;
}

ResourceReport resource_table_report(std::span<const ResourceRow> rows, int qam_order, int n_out) {
  ResourceReport report;
  auto add = [&](const ResourceRow& r, const char* col, double computed, double published) {
    DerivedCell cell;
    cell.table = r.table;
    cell.type = r.type;
    cell.column = col;
    cell.computed = computed;
    cell.published = published;
    cell.rel_error = published != 0.0 ? (computed - published) / published : 0.0;
    cell.mismatch = std::abs(cell.rel_error) > 0.05;
    report.cells.push_back(cell);
  };
  for (const auto& r : rows) {
    const double t_a = throughput(r.clock_mhz * 1e6, qam_order, n_out);
    const double n200 = n_fpga(kTarget200GBps, t_a, r.max_utilization);
    add(r, "throughput_gbps", t_a / 1e9, r.published_throughput_gbps);
    add(r, "n_fpga_200g", n200, r.published_n200);
    add(r, "n_fpga_400g_dual", n200 * kDualCarrierFactor, r.published_n400_dual);
    add(r, "n_fpga_400g_56gbd", n200 * symbol_rate_scaling(56.0, 34.0), r.published_n400_56gbd);
  }
  return report;
}

std::vector<ResourceRow> load_resource_rows(const std::string& path) {
  const CsvTable t = read_csv(path);
  const auto c_table = t.column("table");
  const auto c_type = t.column("type");
  const auto c_clock = t.column("clock_mhz");
  const auto c_util = t.column("max_utilization_pct");
  const auto c_tp = t.column("throughput_gbps");
  const auto c_200 = t.column("n_fpga_200g");
  const auto c_dual = t.column("n_fpga_400g_dual");
  const auto c_56 = t.column("n_fpga_400g_56gbd");
  std::vector<ResourceRow> rows;
  for (const auto& f : t.rows) {
    ResourceRow r;
    r.table = f.at(c_table);
    r.type = f.at(c_type);
    r.clock_mhz = parse_double(f.at(c_clock));
    r.max_utilization = parse_double(f.at(c_util)) / 100.0;
    r.published_throughput_gbps = parse_double(f.at(c_tp));
    r.published_n200 = parse_double(f.at(c_200));
    r.published_n400_dual = parse_double(f.at(c_dual));
    r.published_n400_56gbd = parse_double(f.at(c_56));
    rows.push_back(r);
  }
  return rows;
}

}  // namespace fibereq
