#pragma once

#include <vector>

#include "edgedis/tensor.hpp"

namespace edgedis {

/// Read-only CSR view of a constant matrix. Used as a fast path for the
/// first-layer projections when node features are sparse (e.g. bag-of-words
/// indicators); gradients never flow into it.
struct SparseRows {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;  // rows+1
  std::vector<int> col;
  std::vector<double> val;

  static SparseRows from_dense(const Matrix& m) {
    SparseRows s;
    s.rows = static_cast<int>(m.rows());
    s.cols = static_cast<int>(m.cols());
    s.row_ptr.assign(static_cast<std::size_t>(s.rows) + 1, 0);
    for (int i = 0; i < s.rows; ++i) {
      for (int j = 0; j < s.cols; ++j) {
        if (m(i, j) != 0.0) {
          s.col.push_back(j);
          s.val.push_back(m(i, j));
        }
      }
      s.row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<int>(s.col.size());
    }
    return s;
  }

  double density() const {
    const double total = static_cast<double>(rows) * static_cast<double>(cols);
    return total > 0 ? static_cast<double>(val.size()) / total : 0.0;
  }
};

}  // namespace edgedis
