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

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tabframe/error.hpp"

namespace tabframe {

using Index = std::int64_t;
using RowMajorMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMajorMatrixXi =
    Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {
inline void check_index(Index i, Index bound, const char* what) {
  if (i < 0 || i >= bound) {
    throw IndexOutOfBounds(std::string(what) + " index " + std::to_string(i) +
                           " outside [0, " + std::to_string(bound) + ")");
  }
}
}  // namespace detail

/// Ragged tensor of shape [N, C, *] in compressed (val, ptr) form.
///
/// Cell (i, j) occupies val[ptr[C*i + j] .. ptr[C*i + j + 1]). `ptr` has
/// N*C + 1 non-decreasing entries starting at 0 and ending at val.size().
template <typename Scalar>
class MultiNestedTensor {
 public:
  using Nested = std::vector<std::vector<std::vector<Scalar>>>;

  MultiNestedTensor() : ptr_{0} {}

  /// Takes ownership of an already-compressed layout after checking it.
  MultiNestedTensor(Index num_rows, Index num_cols, std::vector<Scalar> val,
                    std::vector<std::int64_t> ptr)
      : num_rows_(num_rows), num_cols_(num_cols), val_(std::move(val)),
        ptr_(std::move(ptr)) {
    if (num_rows_ < 0 || num_cols_ < 0 ||
        ptr_.size() != static_cast<std::size_t>(num_rows_ * num_cols_ + 1) ||
        ptr_.front() != 0 ||
        ptr_.back() != static_cast<std::int64_t>(val_.size())) {
      throw RaggedShape("inconsistent (val, ptr) layout");
    }
    for (std::size_t k = 1; k < ptr_.size(); ++k) {
      if (ptr_[k] < ptr_[k - 1]) throw RaggedShape("ptr is not monotone");
    }
  }

  /// Flattens [N][C][len] nested lists. Every row needs the same cell count.
  static MultiNestedTensor from_nested(const Nested& rows) {
    MultiNestedTensor t;
    t.num_rows_ = static_cast<Index>(rows.size());
    t.num_cols_ = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
    t.ptr_.reserve(rows.size() * t.num_cols_ + 1);
    for (const auto& row : rows) {
      if (static_cast<Index>(row.size()) != t.num_cols_) {
        throw RaggedShape("row has " + std::to_string(row.size()) +
                          " cells, expected " + std::to_string(t.num_cols_));
      }
      for (const auto& cell : row) {
        t.val_.insert(t.val_.end(), cell.begin(), cell.end());
        t.ptr_.push_back(static_cast<std::int64_t>(t.val_.size()));
      }
    }
    return t;
  }

  /// Empty tensor with the given column count and zero rows.
  static MultiNestedTensor empty(Index num_cols) {
    MultiNestedTensor t;
    t.num_cols_ = num_cols;
    return t;
  }

  Nested to_nested() const {
    Nested rows(num_rows_, std::vector<std::vector<Scalar>>(num_cols_));
    for (Index i = 0; i < num_rows_; ++i) {
      for (Index j = 0; j < num_cols_; ++j) {
        auto cell = get(i, j);
        rows[i][j].assign(cell.begin(), cell.end());
      }
    }
    return rows;
  }

  Index num_rows() const { return num_rows_; }
  Index num_cols() const { return num_cols_; }
  const std::vector<Scalar>& val() const { return val_; }
  const std::vector<std::int64_t>& ptr() const { return ptr_; }

  /// View of cell (i, j).
  std::span<const Scalar> get(Index i, Index j) const {
    detail::check_index(i, num_rows_, "row");
    detail::check_index(j, num_cols_, "column");
    const auto k = num_cols_ * i + j;
    return std::span<const Scalar>(val_.data() + ptr_[k],
                                   static_cast<std::size_t>(ptr_[k + 1] - ptr_[k]));
  }

  Index cell_length(Index i, Index j) const {
    return static_cast<Index>(get(i, j).size());
  }

  /// Gathers rows (duplicates allowed) into a freshly compacted tensor.
  MultiNestedTensor select_rows(std::span<const Index> rows) const {
    MultiNestedTensor out;
    out.num_rows_ = static_cast<Index>(rows.size());
    out.num_cols_ = num_cols_;
    std::size_t total = 0;
    for (Index r : rows) {
      detail::check_index(r, num_rows_, "row");
      total += ptr_[num_cols_ * (r + 1)] - ptr_[num_cols_ * r];
    }
    out.val_.reserve(total);
    out.ptr_.reserve(rows.size() * num_cols_ + 1);
    for (Index r : rows) {
      const auto first = ptr_[num_cols_ * r];
      const auto last = ptr_[num_cols_ * (r + 1)];
      const auto base = static_cast<std::int64_t>(out.val_.size()) - first;
      out.val_.insert(out.val_.end(), val_.begin() + first, val_.begin() + last);
      for (Index j = 1; j <= num_cols_; ++j) {
        out.ptr_.push_back(ptr_[num_cols_ * r + j] + base);
      }
    }
    return out;
  }

  bool operator==(const MultiNestedTensor&) const = default;

 private:
  Index num_rows_ = 0;
  Index num_cols_ = 0;
  std::vector<Scalar> val_;
  std::vector<std::int64_t> ptr_;
};

/// Per-column embeddings of shape [N, C, D_j] packed side by side into one
/// dense [N, sum(D_j)] matrix.
class MultiEmbeddingTensor {
 public:
  MultiEmbeddingTensor() : offsets_{0} {}

  MultiEmbeddingTensor(std::vector<Index> dims, RowMajorMatrixXd values)
      : dims_(std::move(dims)), values_(std::move(values)) {
    offsets_.assign(1, 0);
    for (Index d : dims_) {
      if (d < 1) throw ShapeMismatch("embedding dims must be >= 1");
      offsets_.push_back(offsets_.back() + d);
    }
    if (offsets_.back() != values_.cols()) {
      throw ShapeMismatch("values have " + std::to_string(values_.cols()) +
                          " columns, dims sum to " +
                          std::to_string(offsets_.back()));
    }
  }

  template <typename Derived>
  static MultiEmbeddingTensor from_columns(
      const std::vector<Derived>& cols) {
    std::vector<Index> dims;
    Index rows = cols.empty() ? 0 : cols.front().rows();
    Index width = 0;
    for (const auto& c : cols) {
      if (c.rows() != rows) {
        throw RowCountMismatch("embedding column has " +
                               std::to_string(c.rows()) + " rows, expected " +
                               std::to_string(rows));
      }
      dims.push_back(c.cols());
      width += c.cols();
    }
    RowMajorMatrixXd values(rows, width);
    Index offset = 0;
    for (const auto& c : cols) {
      values.middleCols(offset, c.cols()) = c;
      offset += c.cols();
    }
    return MultiEmbeddingTensor(std::move(dims), std::move(values));
  }

  Index num_rows() const { return values_.rows(); }
  Index num_cols() const { return static_cast<Index>(dims_.size()); }
  const std::vector<Index>& dims() const { return dims_; }
  const std::vector<Index>& offsets() const { return offsets_; }
  const RowMajorMatrixXd& values() const { return values_; }

  Eigen::VectorXd get(Index i, Index j) const {
    detail::check_index(i, num_rows(), "row");
    detail::check_index(j, num_cols(), "column");
    return values_.row(i).segment(offsets_[j], dims_[j]).transpose();
  }

  /// Dense [N, D_j] block of column j.
  RowMajorMatrixXd column(Index j) const {
    detail::check_index(j, num_cols(), "column");
    return values_.middleCols(offsets_[j], dims_[j]);
  }

  MultiEmbeddingTensor select_rows(std::span<const Index> rows) const {
    RowMajorMatrixXd out(static_cast<Index>(rows.size()), values_.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      detail::check_index(rows[k], num_rows(), "row");
      out.row(static_cast<Index>(k)) = values_.row(rows[k]);
    }
    return MultiEmbeddingTensor(dims_, std::move(out));
  }

  bool operator==(const MultiEmbeddingTensor& other) const {
    return dims_ == other.dims_ && values_.rows() == other.values_.rows() &&
           values_.cols() == other.values_.cols() &&
           std::equal(values_.data(), values_.data() + values_.size(),
                      other.values_.data(),
                      [](double a, double b) {
                        return std::bit_cast<std::uint64_t>(a) ==
                               std::bit_cast<std::uint64_t>(b);
                      });
  }

 private:
  std::vector<Index> dims_;
  std::vector<Index> offsets_;
  RowMajorMatrixXd values_;
};

}  // namespace tabframe
