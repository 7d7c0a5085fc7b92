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
#include <string>
#include <vector>

#include "fibereq/channel.hpp"

namespace fibereq {

/// Inverse complementary error function on (0, 2).
///
/// Acklam's rational approximation of the inverse normal CDF gives the
/// starting point (relative error ~1.2e-9) through
/// erfcinv(z) = -Phi^{-1}(z/2) / sqrt(2); one Newton step on erfc(x) - z
/// then brings the absolute error below 1e-12 over the range used for BER.
double erfc_inv(double z);

/// Bit error ratio of hard-decided symbols against reference bits
/// (Gray 16QAM, minimum distance).
double ber(std::span<const cplx> predicted, std::span<const std::uint8_t> reference_bits);

/// Q = 20 log10(sqrt(2) erfcinv(2 BER)) in dB. BER <= 0 returns +inf and
/// BER >= 0.5 returns -inf; q_factor_in_range reports which case applies.
double q_factor(double ber);
bool q_factor_in_range(double ber);

/// Inverse of q_factor: the Gaussian-theory BER of a Q in dB.
double ber_from_q(double q_db);

/// Achieved throughput in bit/s: clock x log2(QAM) x n_out.
double throughput(double clock_hz, int qam_order, int n_out);

/// Equivalent device count: T_target / T_achieved x U_t.
double n_fpga(double t_target_bps, double t_achieved_bps, double utilization);

/// Scenario scale factors applied to the 200G device count.
inline constexpr double kDualCarrierFactor = 2.0;
inline double symbol_rate_scaling(double new_baud, double old_baud) {
  return (new_baud * new_baud) / (old_baud * old_baud);
}
inline constexpr double kTarget200GBps = 272e9;

struct MetricsReport {
  std::string label;
  double ber = 0.5;
  double q_db = 0.0;
  long n_real_mults_per_symbol = 0;
  double throughput_gbps = 0.0;
  double n_fpga = 0.0;
  double utilization = 1.0;
  double clock_mhz = 0.0;

  static std::string csv_header();
  std::string to_csv_row() const;
  std::string to_json_line() const;
};

/// One published implementation row (synthesis outputs are inputs here).
struct ResourceRow {
  std::string table;        // "V" or "VI"
  std::string type;         // biLSTM+CNN, Deep CNN, CDC
  double clock_mhz = 0.0;
  double max_utilization = 0.0;  // fraction
  double published_throughput_gbps = 0.0;
  double published_n200 = 0.0;
  double published_n400_dual = 0.0;
  double published_n400_56gbd = 0.0;
};

struct DerivedCell {
  std::string table;
  std::string type;
  std::string column;
  double computed = 0.0;
  double published = 0.0;
  double rel_error = 0.0;
  bool mismatch = false;  // |rel_error| > 5%
};

struct ResourceReport {
  std::vector<DerivedCell> cells;
  bool any_mismatch() const;
};

ResourceReport resource_table_report(std::span<const ResourceRow> rows, int qam_order = 16,
                                     int n_out = 61);

/// Parses the published-table CSV (comment lines start with '#').
std::vector<ResourceRow> load_resource_rows(const std::string& path);

}  // namespace fibereq
