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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tabframe/ragged.hpp"
#include "tabframe/schema.hpp"
#include "tabframe/semantic_type.hpp"

namespace tabframe {

inline constexpr Index kMissingIndex = -1;
inline constexpr Index kTimestampComponents = 7;
inline constexpr Index kNumQuantiles = 17;

/// Mean/std over the non-missing entries of one numeric series.
struct NumericSummary {
  double mean = 0.0;
  double std = 0.0;  // population
  Index count_missing = 0;
  bool all_missing = false;
  std::vector<double> quantiles;

  bool operator==(const NumericSummary&) const = default;
};

struct ColumnStats {
  SemanticType stype = SemanticType::numerical;
  NumericSummary numeric;                  // numerical
  std::vector<NumericSummary> components;  // timestamp: one per component
  std::map<Index, Index> category_count;   // categorical family
  Index num_categories = 0;                // map size, or vocab size for tokens
  Index embedding_dim = 0;                 // embedded family

  bool operator==(const ColumnStats&) const = default;
};

/// Bijection between category strings and contiguous indices 0..K-1.
class CategoryMap {
 public:
  /// Index of `category`, assigning the next index on first sight.
  Index insert(const std::string& category);
  /// Index of `category` or kMissingIndex when unseen.
  Index find(const std::string& category) const;

  Index size() const { return static_cast<Index>(reverse_.size()); }
  const std::vector<std::string>& categories() const { return reverse_; }
  static CategoryMap from_categories(std::vector<std::string> categories);

  bool operator==(const CategoryMap&) const = default;

 private:
  std::map<std::string, Index> forward_;
  std::vector<std::string> reverse_;
};

/// [N, k] reals; missing = NaN.
struct DenseFloatBlock {
  RowMajorMatrixXd values;
  bool operator==(const DenseFloatBlock& o) const;
};

/// [N, k] category indices; missing = -1.
struct DenseIntBlock {
  RowMajorMatrixXi values;
  bool operator==(const DenseIntBlock& o) const { return values == o.values; }
};

/// [N, k, 7] stored as [N, 7k]: year, month, day, day_of_week (Mon=0), hour,
/// minute, second. Missing timestamps are all -1.
struct TimestampBlock {
  RowMajorMatrixXi values;

  Index num_cols() const { return values.cols() / kTimestampComponents; }
  std::int64_t component(Index i, Index j, Index c) const {
    return values(i, j * kTimestampComponents + c);
  }
  bool operator==(const TimestampBlock& o) const { return values == o.values; }
};

using NestedBlock = MultiNestedTensor<std::int64_t>;

using ColumnBlock = std::variant<DenseFloatBlock, DenseIntBlock, TimestampBlock,
                                 NestedBlock, MultiEmbeddingTensor>;

Index block_rows(const ColumnBlock& block);
Index block_cols(const ColumnBlock& block);
ColumnBlock select_block_rows(const ColumnBlock& block,
                              std::span<const Index> rows);

/// Prediction target carried alongside the feature blocks. Binary labels are
/// 0/1 (NaN when missing); `classes` holds the original strings when the raw
/// labels were not numeric.
struct TargetColumn {
  std::string name;
  Eigen::VectorXd values;
  std::vector<std::string> classes;

  bool operator==(const TargetColumn& o) const;
};

/// Materialized table: per-semantic-type column blocks plus statistics.
/// Treated as immutable; row selection builds a new frame.
struct TensorFrame {
  Index num_rows = 0;
  Schema schema;
  /// Feature columns in schema order; position = global column index.
  std::vector<ColumnSpec> columns;
  std::map<SemanticType, ColumnBlock> blocks;
  std::map<SemanticType, std::vector<std::string>> column_names_by_stype;
  std::map<std::string, ColumnStats> stats;
  std::map<std::string, CategoryMap> category_maps;
  std::optional<TargetColumn> target;

  Index num_cols() const { return static_cast<Index>(columns.size()); }
  const ColumnBlock* block(SemanticType s) const;
  const std::vector<std::string>& names(SemanticType s) const;

  bool operator==(const TensorFrame&) const = default;
};

/// Global indices of the columns typed `s`, ascending.
std::vector<Index> columns_by_stype(const TensorFrame& frame, SemanticType s);

/// Global indices ordered by ascending semantic type, then schema order.
/// This is the column order of the encoded [N, C, F] tensor.
std::vector<Index> canonical_column_order(const TensorFrame& frame);

/// Gathers rows (duplicates allowed) of every block and of the target.
/// Statistics and category maps are carried over unchanged.
TensorFrame frame_row_select(const TensorFrame& frame,
                             std::span<const Index> rows);

struct Violation {
  std::string column;
  std::string message;
};

/// First broken invariant, or nullopt for a consistent frame.
std::optional<Violation> frame_validate(const TensorFrame& frame);

}  // namespace tabframe
