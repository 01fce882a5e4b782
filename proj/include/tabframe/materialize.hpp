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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tabframe/embed.hpp"
#include "tabframe/frame.hpp"
#include "tabframe/schema.hpp"
#include "tabframe/table.hpp"

namespace tabframe {

inline constexpr Index kDefaultVocabSize = 30000;

struct MaterializeOptions {
  char list_separator = '|';
  Index vocab_size = kDefaultVocabSize;
};

/// Rule cascade over a column sample: numerical, timestamp,
/// multicategorical (separator present), categorical (few distinct values),
/// otherwise text_embedded. Throws EmptyColumn when every cell is missing.
SemanticType infer_stype(std::span<const RawCell> cells, char list_separator = '|');

/// Indices by first occurrence; missing -> -1. With `existing`, the map is
/// frozen and unseen categories also map to -1.
std::pair<Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>, CategoryMap>
encode_categorical_indices(std::span<const RawCell> cells,
                           const CategoryMap* existing = nullptr);

/// Lowercases, splits on whitespace and ASCII punctuation and hashes every
/// token with FNV-1a-64 modulo `vocab_size`.
std::vector<std::int64_t> tokenize(std::string_view text, Index vocab_size);

/// One nested cell per (row, column); missing or empty text -> empty cell.
NestedBlock tokenize_text(std::span<const std::span<const RawCell>> columns,
                          Index vocab_size);

using TimestampParts = std::array<std::int64_t, kTimestampComponents>;

/// ISO-8601 date or date-time (optional fraction, `Z` or +hh:mm offset),
/// normalized to UTC.
std::optional<TimestampParts> parse_timestamp(std::string_view text);

/// [N, 7] components; missing cells are all -1. `column` labels errors.
RowMajorMatrixXi materialize_timestamp(std::span<const RawCell> cells,
                                       const std::string& column = "");

/// Statistics of column j of a materialized block. `num_categories` is the
/// category map size (categorical family) or vocab size (tokens).
ColumnStats compute_stats(const ColumnBlock& block, SemanticType stype, Index j,
                          Index num_categories = 0);

/// Raw table -> TensorFrame. `existing_maps` freezes category maps (and
/// target classes, keyed by the target name) for inference-time data.
TensorFrame materialize(const RawTable& table, const Schema& schema,
                        const EmbedderRegistry& embedders,
                        const MaterializeOptions& options = {},
                        const std::map<std::string, CategoryMap>* existing_maps = nullptr);

/// Copy of `frame` whose statistics are recomputed over `rows` only.
/// Category maps and num_categories are kept.
TensorFrame with_stats_from_rows(const TensorFrame& frame,
                                 std::span<const Index> rows);

}  // namespace tabframe
