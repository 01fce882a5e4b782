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

#include "tabframe/frame.hpp"

#include <bit>
#include <cmath>
#include <set>

namespace tabframe {

namespace {

bool bitwise_equal(const double* a, const double* b, Index n) {
  for (Index k = 0; k < n; ++k) {
    if (std::bit_cast<std::uint64_t>(a[k]) != std::bit_cast<std::uint64_t>(b[k])) {
      return false;
    }
  }
  return true;
}

template <typename Matrix>
Matrix gather_matrix_rows(const Matrix& m, std::span<const Index> rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    detail::check_index(rows[k], m.rows(), "row");
    out.row(static_cast<Index>(k)) = m.row(rows[k]);
  }
  return out;
}

bool block_matches(SemanticType s, const ColumnBlock& b) {
  switch (s) {
    case SemanticType::numerical:
      return std::holds_alternative<DenseFloatBlock>(b);
    case SemanticType::categorical:
      return std::holds_alternative<DenseIntBlock>(b);
    case SemanticType::timestamp:
      return std::holds_alternative<TimestampBlock>(b);
    case SemanticType::multicategorical:
    case SemanticType::text_tokenized:
      return std::holds_alternative<NestedBlock>(b);
    case SemanticType::text_embedded:
    case SemanticType::embedding:
      return std::holds_alternative<MultiEmbeddingTensor>(b);
  }
  return false;
}

std::optional<Violation> check_indices(const TensorFrame& frame, SemanticType s,
                                       const ColumnBlock& block) {
  const auto& names = frame.names(s);
  auto stats_for = [&](Index j) -> const ColumnStats& {
    return frame.stats.at(names[j]);
  };
  if (const auto* cat = std::get_if<DenseIntBlock>(&block)) {
    for (Index j = 0; j < cat->values.cols(); ++j) {
      const Index k = stats_for(j).num_categories;
      for (Index i = 0; i < cat->values.rows(); ++i) {
        const auto v = cat->values(i, j);
        if (v < kMissingIndex || v >= k) {
          return Violation{names[j], "category index " + std::to_string(v) +
                                         " outside [-1, " + std::to_string(k) + ")"};
        }
      }
    }
  } else if (const auto* nested = std::get_if<NestedBlock>(&block)) {
    const Index lower = s == SemanticType::text_tokenized ? 0 : kMissingIndex;
    for (Index i = 0; i < nested->num_rows(); ++i) {
      for (Index j = 0; j < nested->num_cols(); ++j) {
        const Index k = stats_for(j).num_categories;
        for (auto v : nested->get(i, j)) {
          if (v < lower || v >= k) {
            return Violation{names[j], "index " + std::to_string(v) +
                                           " outside [" + std::to_string(lower) +
                                           ", " + std::to_string(k) + ")"};
          }
        }
      }
    }
  } else if (const auto* ts = std::get_if<TimestampBlock>(&block)) {
    static constexpr std::int64_t lo[] = {0, 1, 1, 0, 0, 0, 0};
    static constexpr std::int64_t hi[] = {9999, 12, 31, 6, 23, 59, 60};
    for (Index i = 0; i < ts->values.rows(); ++i) {
      for (Index j = 0; j < ts->num_cols(); ++j) {
        const bool missing = ts->component(i, j, 0) == kMissingIndex;
        for (Index c = 0; c < kTimestampComponents; ++c) {
          const auto v = ts->component(i, j, c);
          if (missing ? v != kMissingIndex : (v < lo[c] || v > hi[c])) {
            return Violation{names[j], "invalid timestamp component"};
          }
        }
      }
    }
  } else if (const auto* emb = std::get_if<MultiEmbeddingTensor>(&block)) {
    for (Index j = 0; j < emb->num_cols(); ++j) {
      if (emb->dims()[j] != stats_for(j).embedding_dim) {
        return Violation{names[j], "embedding width differs from stats"};
      }
    }
  }
  return std::nullopt;
}

}  // namespace

Index CategoryMap::insert(const std::string& category) {
  auto [it, inserted] = forward_.try_emplace(category, size());
  if (inserted) reverse_.push_back(category);
  return it->second;
}

Index CategoryMap::find(const std::string& category) const {
  auto it = forward_.find(category);
  return it == forward_.end() ? kMissingIndex : it->second;
}

CategoryMap CategoryMap::from_categories(std::vector<std::string> categories) {
  CategoryMap map;
  for (auto& c : categories) {
    if (map.find(c) != kMissingIndex) {
      throw SchemaError("duplicate category '" + c + "'");
    }
    map.insert(c);
  }
  return map;
}

bool DenseFloatBlock::operator==(const DenseFloatBlock& o) const {
  return values.rows() == o.values.rows() && values.cols() == o.values.cols() &&
         bitwise_equal(values.data(), o.values.data(), values.size());
}

bool TargetColumn::operator==(const TargetColumn& o) const {
  return name == o.name && classes == o.classes &&
         values.size() == o.values.size() &&
         bitwise_equal(values.data(), o.values.data(), values.size());
}

Index block_rows(const ColumnBlock& block) {
  return std::visit(
      [](const auto& b) -> Index {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NestedBlock> ||
                      std::is_same_v<T, MultiEmbeddingTensor>) {
          return b.num_rows();
        } else {
          return b.values.rows();
        }
      },
      block);
}

Index block_cols(const ColumnBlock& block) {
  return std::visit(
      [](const auto& b) -> Index {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NestedBlock> ||
                      std::is_same_v<T, MultiEmbeddingTensor> ||
                      std::is_same_v<T, TimestampBlock>) {
          return b.num_cols();
        } else {
          return b.values.cols();
        }
      },
      block);
}

ColumnBlock select_block_rows(const ColumnBlock& block,
                              std::span<const Index> rows) {
  return std::visit(
      [&](const auto& b) -> ColumnBlock {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, NestedBlock> ||
                      std::is_same_v<T, MultiEmbeddingTensor>) {
          return b.select_rows(rows);
        } else {
          return T{gather_matrix_rows(b.values, rows)};
        }
      },
      block);
}

const ColumnBlock* TensorFrame::block(SemanticType s) const {
  auto it = blocks.find(s);
  return it == blocks.end() ? nullptr : &it->second;
}

const std::vector<std::string>& TensorFrame::names(SemanticType s) const {
  static const std::vector<std::string> kEmpty;
  auto it = column_names_by_stype.find(s);
  return it == column_names_by_stype.end() ? kEmpty : it->second;
}

std::vector<Index> columns_by_stype(const TensorFrame& frame, SemanticType s) {
  std::vector<Index> out;
  for (Index j = 0; j < frame.num_cols(); ++j) {
    if (frame.columns[j].stype == s) out.push_back(j);
  }
  return out;
}

std::vector<Index> canonical_column_order(const TensorFrame& frame) {
  std::vector<Index> out;
  for (SemanticType s : kAllSemanticTypes) {
    auto cols = columns_by_stype(frame, s);
    out.insert(out.end(), cols.begin(), cols.end());
  }
  return out;
}

TensorFrame frame_row_select(const TensorFrame& frame,
                             std::span<const Index> rows) {
  for (Index r : rows) detail::check_index(r, frame.num_rows, "row");
  TensorFrame out;
  out.num_rows = static_cast<Index>(rows.size());
  out.schema = frame.schema;
  out.columns = frame.columns;
  out.column_names_by_stype = frame.column_names_by_stype;
  out.stats = frame.stats;
  out.category_maps = frame.category_maps;
  for (const auto& [s, block] : frame.blocks) {
    out.blocks.emplace(s, select_block_rows(block, rows));
  }
  if (frame.target) {
    TargetColumn t{frame.target->name, Eigen::VectorXd(out.num_rows),
                   frame.target->classes};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      t.values[static_cast<Index>(k)] = frame.target->values[rows[k]];
    }
    out.target = std::move(t);
  }
  return out;
}

std::optional<Violation> frame_validate(const TensorFrame& frame) {
  std::multiset<std::string> block_names;
  for (const auto& [s, block] : frame.blocks) {
    const auto& names = frame.names(s);
    const std::string first = names.empty() ? std::string(to_string(s)) : names.front();
    if (!block_matches(s, block)) {
      return Violation{first, "block layout does not match semantic type"};
    }
    if (block_rows(block) != frame.num_rows) {
      return Violation{first, "row count mismatch: block has " +
                                  std::to_string(block_rows(block)) +
                                  " rows, frame has " +
                                  std::to_string(frame.num_rows)};
    }
    if (block_cols(block) != static_cast<Index>(names.size())) {
      return Violation{first, "column count mismatch for " +
                                  std::string(to_string(s)) + " block"};
    }
    for (const auto& n : names) {
      auto it = frame.stats.find(n);
      if (it == frame.stats.end()) return Violation{n, "missing column stats"};
      if (it->second.stype != s) return Violation{n, "stats type mismatch"};
      if (it->second.numeric.std < 0) return Violation{n, "negative std"};
      block_names.insert(n);
    }
    if (auto v = check_indices(frame, s, block)) return v;
  }
  for (const auto& [s, names] : frame.column_names_by_stype) {
    if (!names.empty() && !frame.blocks.contains(s)) {
      return Violation{names.front(), "names without a block"};
    }
  }
  std::multiset<std::string> feature_names;
  for (const auto& c : frame.columns) feature_names.insert(c.name);
  if (block_names != feature_names) {
    return Violation{"", "block column names differ from feature columns"};
  }
  for (SemanticType s : kAllSemanticTypes) {
    std::vector<std::string> expected;
    for (Index j : columns_by_stype(frame, s)) expected.push_back(frame.columns[j].name);
    if (expected != frame.names(s)) {
      return Violation{expected.empty() ? "" : expected.front(),
                       "column order differs from schema order"};
    }
  }
  if (frame.target && frame.target->values.size() != frame.num_rows) {
    return Violation{frame.target->name, "row count mismatch in target"};
  }
  return std::nullopt;
}

}  // namespace tabframe
