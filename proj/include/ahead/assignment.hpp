/* Copyright 2026 The aheadeval Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ahead/errors.hpp"

namespace ahead {

class CostMatrix {
 public:
  CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (rows_ == 0 || cols_ == 0) {
      throw InvalidArgument("cost matrix must be at least 1x1");
    }
    if (values_.size() != rows_ * cols_) {
      throw InvalidArgument("cost matrix has " + std::to_string(values_.size()) +
                            " values, expected " +
                            std::to_string(rows_ * cols_));
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw InvalidArgument("non-finite cost at (" +
                              std::to_string(k / cols_) + ", " +
                              std::to_string(k % cols_) + ")");
      }
    }
  }

  CostMatrix(std::size_t rows, std::size_t cols)
      : CostMatrix(rows, cols, std::vector<double>(rows * cols, 0.0)) {}

  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw InvalidArgument("ragged cost matrix");
      values.insert(values.end(), row.begin(), row.end());
    }
    return CostMatrix(r, c, std::move(values));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const {
    return values_[r * cols_ + c];
  }
  // Unchecked write access; callers keep entries finite.
  double& at(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

struct Assignment {
  // (row, col) pairs, sorted by row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

namespace detail {

// Square Kuhn-Munkres. Returns the row -> column matching and leaves the
// dual potentials in u (rows) and v (cols), both 0-indexed.
inline std::vector<std::size_t> hungarian_square(const std::vector<double>& c,
                                                 std::size_t n,
                                                 std::vector<double>& u,
                                                 std::vector<double>& v) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-indexed working arrays; index 0 is the virtual root.
  std::vector<double> pu(n + 1, 0.0), pv(n + 1, 0.0);
  std::vector<std::size_t> col_owner(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    col_owner[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = col_owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c[(i0 - 1) * n + (j - 1)] - pu[i0] - pv[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          pu[col_owner[j]] += delta;
          pv[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (col_owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      col_owner[j0] = col_owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[col_owner[j] - 1] = j - 1;
  u.assign(pu.begin() + 1, pu.end());
  v.assign(pv.begin() + 1, pv.end());
  return row_to_col;
}

// Among all optimal matchings (edges with zero reduced cost under the final
// potentials) picks the lexicographically smallest column sequence, row by
// row. Only the first `canonical_rows` rows are canonicalized.
inline void canonicalize(const std::vector<double>& c, std::size_t n,
                         const std::vector<double>& u,
                         const std::vector<double>& v, double tol,
                         std::size_t canonical_rows,
                         std::vector<std::size_t>& row_to_col) {
  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (std::abs(c[i * n + j] - u[i] - v[j]) <= tol) tight[i].push_back(j);
    }
  }
  std::vector<std::size_t> col_to_row(n);
  for (std::size_t i = 0; i < n; ++i) col_to_row[row_to_col[i]] = i;

  std::vector<std::size_t> parent_col(n);
  std::vector<char> seen(n);
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < canonical_rows; ++i) {
    const std::size_t freed = row_to_col[i];
    for (std::size_t j : tight[i]) {
      if (j >= freed) break;
      const std::size_t r = col_to_row[j];
      if (r < i) continue;  // owned by an already fixed row
      // Re-route r to the column i gives up, through rows > i only.
      std::fill(seen.begin(), seen.end(), 0);
      queue.assign(1, r);
      seen[j] = 1;
      std::size_t found_row = n;
      for (std::size_t q = 0; q < queue.size() && found_row == n; ++q) {
        const std::size_t row = queue[q];
        for (std::size_t k : tight[row]) {
          if (seen[k]) continue;
          seen[k] = 1;
          parent_col[k] = row;
          if (k == freed) {
            found_row = row;
            break;
          }
          const std::size_t next = col_to_row[k];
          if (next > i) queue.push_back(next);
        }
      }
      if (found_row == n) continue;
      // Walk back from `freed`, shifting each row onto the column it reached.
      std::size_t col = freed;
      while (true) {
        const std::size_t row = parent_col[col];
        const std::size_t prev = row_to_col[row];
        row_to_col[row] = col;
        col_to_row[col] = row;
        if (row == r) break;
        col = prev;
      }
      row_to_col[i] = j;
      col_to_row[j] = i;
      break;
    }
  }
}

}  // namespace detail

// Minimum total cost matching of min(rows, cols) pairs. Rectangular inputs
// are padded to square with a constant sentinel; sentinel pairs are dropped.
// Among equal-cost optima the lexicographically smallest column sequence
// (by ascending row) is returned.
inline Assignment hungarian_min_cost(const CostMatrix& cost) {
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  const std::size_t n = std::max(rows, cols);

  double max_abs = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      max_abs = std::max(max_abs, std::abs(cost(r, c)));
    }
  }
  const double sentinel = 1.0 + max_abs * static_cast<double>(n);

  std::vector<double> square(n * n, sentinel);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) square[r * n + c] = cost(r, c);
  }

  std::vector<double> u, v;
  auto row_to_col = detail::hungarian_square(square, n, u, v);
  const double tol = 64.0 * static_cast<double>(n) *
                     std::numeric_limits<double>::epsilon() *
                     std::max(1.0, sentinel);
  detail::canonicalize(square, n, u, v, tol, rows, row_to_col);

  Assignment out;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = row_to_col[r];
    if (c < cols) {
      out.pairs.emplace_back(r, c);
      out.total_cost += cost(r, c);
    }
  }
  return out;
}

}  // namespace ahead
