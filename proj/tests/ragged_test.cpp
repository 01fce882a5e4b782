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

#include <gtest/gtest.h>

#include "tabframe/error.hpp"
#include "tabframe/hash.hpp"
#include "tabframe/ragged.hpp"

namespace tabframe {
namespace {

using Nested = std::vector<std::vector<std::vector<std::int64_t>>>;
using Cell = std::vector<std::int64_t>;

std::vector<std::int64_t> span_vec(std::span<const std::int64_t> s) { return {s.begin(), s.end()}; }

TEST(MultiNestedTensor, FromNestedWorkedExample) {
  const Nested rows = {{{0, 1, 2}, {3}}, {{4}, {5, 6}}};
  const auto t = MultiNestedTensor<std::int64_t>::from_nested(rows);
  EXPECT_EQ(t.val(), (Cell{0, 1, 2, 3, 4, 5, 6}));
  EXPECT_EQ(t.ptr(), (Cell{0, 3, 4, 5, 7}));
  EXPECT_EQ(span_vec(t.get(1, 1)), (Cell{5, 6}));
  EXPECT_EQ(span_vec(t.get(0, 1)), (Cell{3}));
}

TEST(MultiNestedTensor, EmptyAndSingletonCells) {
  const auto empty = MultiNestedTensor<std::int64_t>::from_nested(Nested{{{}, {}}});
  EXPECT_TRUE(empty.val().empty());
  EXPECT_EQ(empty.ptr(), (Cell{0, 0, 0}));
  EXPECT_TRUE(empty.get(0, 1).empty());

  const auto single = MultiNestedTensor<std::int64_t>::from_nested(Nested{{{7}}});
  EXPECT_EQ(single.val(), (Cell{7}));
  EXPECT_EQ(single.ptr(), (Cell{0, 1}));
}

TEST(MultiNestedTensor, RaggedRowsRejected) {
  const Nested rows = {{{1}, {2}}, {{3}}};
  EXPECT_THROW(MultiNestedTensor<std::int64_t>::from_nested(rows), RaggedShape);
}

TEST(MultiNestedTensor, OutOfRangeAccess) {
  const auto t = MultiNestedTensor<std::int64_t>::from_nested(Nested{{{1}, {2}}});
  EXPECT_THROW(t.get(1, 0), IndexOutOfBounds);
  EXPECT_THROW(t.get(0, 2), IndexOutOfBounds);
  EXPECT_THROW(t.get(-1, 0), IndexOutOfBounds);
  const std::vector<Index> bad = {3};
  EXPECT_THROW(t.select_rows(bad), IndexOutOfBounds);
}

TEST(MultiNestedTensor, InvalidPtrRejected) {
  EXPECT_THROW(MultiNestedTensor<std::int64_t>(1, 2, {1, 2}, {0, 2, 1}), RaggedShape);
  EXPECT_THROW(MultiNestedTensor<std::int64_t>(1, 2, {1, 2}, {0, 1}), RaggedShape);
  EXPECT_THROW(MultiNestedTensor<std::int64_t>(1, 1, {1, 2}, {0, 1}), RaggedShape);
}

TEST(MultiNestedTensor, SelectRowsExamples) {
  const auto t = MultiNestedTensor<std::int64_t>::from_nested(Nested{{{0, 1, 2}, {3}}, {{4}, {5, 6}}});
  const std::vector<Index> one = {1};
  const auto s = t.select_rows(one);
  EXPECT_EQ(s.val(), (Cell{4, 5, 6}));
  EXPECT_EQ(s.ptr(), (Cell{0, 1, 3}));

  const std::vector<Index> identity = {0, 1};
  EXPECT_EQ(t.select_rows(identity), t);

  const std::vector<Index> dup = {1, 1};
  const auto d = t.select_rows(dup);
  for (Index j = 0; j < 2; ++j) {
    EXPECT_EQ(span_vec(d.get(0, j)), span_vec(t.get(1, j)));
    EXPECT_EQ(span_vec(d.get(1, j)), span_vec(t.get(1, j)));
  }
}

TEST(MultiNestedTensor, RandomizedAgainstNestedOracle) {
  SplitMix64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.next() % 6);
    const Index c = 1 + static_cast<Index>(rng.next() % 6);
    Nested rows(n, std::vector<Cell>(c));
    for (auto& row : rows) {
      for (auto& cell : row) {
        const auto len = rng.next() % 9;
        for (std::uint64_t k = 0; k < len; ++k) cell.push_back(static_cast<std::int64_t>(rng.next() % 100));
      }
    }
    const auto t = MultiNestedTensor<std::int64_t>::from_nested(rows);
    ASSERT_EQ(t.to_nested(), rows);
    ASSERT_EQ(MultiNestedTensor<std::int64_t>::from_nested(t.to_nested()), t);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < c; ++j) {
        const Cell literal(t.val().begin() + t.ptr()[c * i + j], t.val().begin() + t.ptr()[c * i + j + 1]);
        ASSERT_EQ(literal, rows[i][j]);
        ASSERT_EQ(span_vec(t.get(i, j)), rows[i][j]);
      }
    }
    std::vector<Index> sel(rng.next() % 8);
    for (auto& r : sel) r = static_cast<Index>(rng.next() % n);
    const auto s = t.select_rows(sel);
    std::size_t total = 0;
    for (std::size_t k = 0; k < sel.size(); ++k) {
      for (Index j = 0; j < c; ++j) {
        ASSERT_EQ(span_vec(s.get(static_cast<Index>(k), j)), rows[sel[k]][j]);
        total += rows[sel[k]][j].size();
      }
    }
    ASSERT_EQ(s.val().size(), total);
  }
}

TEST(MultiEmbeddingTensor, FromColumnsExample) {
  RowMajorMatrixXd a(2, 2), b(2, 1);
  a << 1, 2, 3, 4;
  b << 5, 6;
  const auto t = MultiEmbeddingTensor::from_columns(std::vector<RowMajorMatrixXd>{a, b});
  EXPECT_EQ(t.offsets(), (std::vector<Index>{0, 2, 3}));
  RowMajorMatrixXd expected(2, 3);
  expected << 1, 2, 5, 3, 4, 6;
  EXPECT_EQ(t.values(), expected);
  EXPECT_EQ(t.get(1, 0), Eigen::Vector2d(3, 4));
  const std::vector<Index> first = {0};
  EXPECT_EQ(t.select_rows(first).values(), expected.topRows(1));
  EXPECT_EQ(t.select_rows(first).dims(), t.dims());
  EXPECT_THROW(t.get(0, 2), IndexOutOfBounds);
}

TEST(MultiEmbeddingTensor, SingleColumnAndRowMismatch) {
  RowMajorMatrixXd a = RowMajorMatrixXd::Random(3, 4);
  const auto t = MultiEmbeddingTensor::from_columns(std::vector<RowMajorMatrixXd>{a});
  EXPECT_EQ(t.offsets(), (std::vector<Index>{0, 4}));
  EXPECT_EQ(t.values(), a);
  RowMajorMatrixXd b(2, 1), c(3, 1);
  EXPECT_THROW(MultiEmbeddingTensor::from_columns(std::vector<RowMajorMatrixXd>{b, c}), RowCountMismatch);
}

TEST(MultiEmbeddingTensor, RowIsConcatenationOfCells) {
  SplitMix64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.next() % 5);
    std::vector<RowMajorMatrixXd> cols;
    for (Index j = 0, c = 1 + static_cast<Index>(rng.next() % 4); j < c; ++j) {
      RowMajorMatrixXd m(n, 1 + static_cast<Index>(rng.next() % 4));
      for (Index k = 0; k < m.size(); ++k) m.data()[k] = rng.next_signed_unit();
      cols.push_back(m);
    }
    const auto t = MultiEmbeddingTensor::from_columns(cols);
    for (Index i = 0; i < n; ++i) {
      Eigen::VectorXd row(t.values().cols());
      Index at = 0;
      for (Index j = 0; j < t.num_cols(); ++j) {
        const Eigen::VectorXd cell = t.get(i, j);
        ASSERT_EQ(cell.size(), t.dims()[j]);
        row.segment(at, cell.size()) = cell;
        at += cell.size();
      }
      ASSERT_EQ(row, t.values().row(i).transpose());
    }
  }
}

}  // namespace
}  // namespace tabframe
