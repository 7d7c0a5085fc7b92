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

#include <string>
#include <string_view>
#include <vector>

namespace fibereq {

inline constexpr int kCsvSchemaVersion = 1;

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);

/// Splits one CSV line on commas (no quoting; fields never contain commas).
std::vector<std::string> split_csv(std::string_view line);

/// Reads a CSV file, skipping '#' comment lines; first row is the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;
};
CsvTable read_csv(const std::string& path);

/// Header comment line carried by every emitted CSV.
std::string csv_schema_line();

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace fibereq
