/*
 * Copyright 2026 The gnndcm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef GNNDCM_COMMON_CSV_HPP
#define GNNDCM_COMMON_CSV_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gnndcm {

/// A parsed CSV file: one header row plus data rows of equal width.
///
/// Blank lines and lines starting with '#' are skipped. Fields are split on
/// commas and trimmed; quoting is not supported.
class CsvTable {
public:
  static CsvTable read(const std::string& path);
  static CsvTable parse(std::string_view text, const std::string& source = "<memory>");

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  const std::string& source() const { return source_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  std::size_t column(std::string_view name) const; // throws DataError if missing

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  double number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;

private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

// Round-trip exact formatting for doubles in text outputs.
std::string format_double(double v);

} // namespace gnndcm

#endif
