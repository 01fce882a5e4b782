/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tabframe/ragged.hpp"

namespace tabframe {

struct Missing {
  bool operator==(const Missing&) const = default;
};

/// One raw value before materialization.
using RawCell = std::variant<Missing, std::string, double,
                             std::vector<std::string>, std::vector<double>>;

inline bool is_missing(const RawCell& c) {
  return std::holds_alternative<Missing>(c);
}

struct RawColumn {
  std::string name;
  std::vector<RawCell> cells;
};

/// Column-oriented raw table; every column has num_rows() cells.
class RawTable {
 public:
  RawTable() = default;
  explicit RawTable(std::vector<RawColumn> columns);

  Index num_rows() const { return num_rows_; }
  const std::vector<RawColumn>& columns() const { return columns_; }
  const RawColumn* find(std::string_view name) const;

 private:
  std::vector<RawColumn> columns_;
  Index num_rows_ = 0;
};

/// RFC-4180 CSV with a mandatory header row. Empty fields become Missing,
/// everything else a string cell.
RawTable parse_csv(std::string_view text);

/// Reads a whole file; throws FileError when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace tabframe
