#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "uagc/kernels.hpp"

namespace uagc {

struct Triplet {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  double value = 0.0;
};

/// Compressed sparse row matrix with finite values and unique (row, col).
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t n_rows, std::size_t n_cols);

  /// Sorts the triplets; rejects duplicates, out-of-range indices and non-finite values.
  static SparseMatrix from_triplets(std::size_t n_rows, std::size_t n_cols,
                                    std::vector<Triplet> entries);
  static SparseMatrix identity(std::size_t n);

  std::size_t rows() const { return n_rows_; }
  std::size_t cols() const { return n_cols_; }
  std::size_t nnz() const { return values_.size(); }

  const std::vector<std::size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return values_; }

  double at(std::size_t r, std::size_t c) const;  // 0 outside the support
  bool contains(std::size_t r, std::size_t c) const;

  std::vector<Triplet> triplets() const;
  std::vector<double> to_dense() const;  // row-major
  std::vector<double> row_sums() const;

  SparseMatrix transposed() const;

  /// Divides each row by its sum; rows summing to zero stay empty.
  SparseMatrix row_normalized() const;

  kernels::CsrView view() const {
    return {n_rows_, n_cols_, row_ptr_, col_idx_, values_};
  }

  friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) = default;

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

/// Element-wise product over the intersection of supports; exact zeros are dropped.
SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b);

/// `# uagc-sparse v1 rows=<n> cols=<n>` then `i,j,value` sorted by (i, j).
void write_sparse(const SparseMatrix& m, std::ostream& out);
SparseMatrix read_sparse(std::istream& in);

}  // namespace uagc
