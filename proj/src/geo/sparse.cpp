#include "uagc/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "uagc/error.hpp"
#include "uagc/text.hpp"

namespace uagc {

SparseMatrix::SparseMatrix(std::size_t n_rows, std::size_t n_cols)
    : n_rows_(n_rows), n_cols_(n_cols), row_ptr_(n_rows + 1, 0) {}

SparseMatrix SparseMatrix::from_triplets(std::size_t n_rows, std::size_t n_cols,
                                         std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m(n_rows, n_cols);
  m.col_idx_.reserve(entries.size());
  m.values_.reserve(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& t = entries[k];
    if (t.row >= n_rows || t.col >= n_cols)
      throw InputError("sparse entry (" + std::to_string(t.row) + "," + std::to_string(t.col) +
                       ") out of range");
    if (!std::isfinite(t.value)) throw InputError("sparse entry has a non-finite value");
    if (k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col)
      throw InputError("duplicate sparse entry (" + std::to_string(t.row) + "," +
                       std::to_string(t.col) + ")");
    ++m.row_ptr_[t.row + 1];
    m.col_idx_.push_back(t.col);
    m.values_.push_back(t.value);
  }
  for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr_[r + 1] += m.row_ptr_[r];
  return m;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i)
    t.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i), 1.0});
  return from_triplets(n, n, std::move(t));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  const auto it = std::lower_bound(begin, end, static_cast<std::uint32_t>(c));
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_idx_.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const {
  const auto begin = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
  const auto end = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
  return std::binary_search(begin, end, static_cast<std::uint32_t>(c));
}

std::vector<Triplet> SparseMatrix::triplets() const {
  std::vector<Triplet> out;
  out.reserve(nnz());
  for (std::size_t r = 0; r < n_rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p)
      out.push_back({static_cast<std::uint32_t>(r), col_idx_[p], values_[p]});
  return out;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> d(n_rows_ * n_cols_, 0.0);
  for (const auto& t : triplets()) d[t.row * n_cols_ + t.col] = t.value;
  return d;
}

std::vector<double> SparseMatrix::row_sums() const {
  std::vector<double> s(n_rows_, 0.0);
  for (std::size_t r = 0; r < n_rows_; ++r)
    for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) s[r] += values_[p];
  return s;
}

SparseMatrix SparseMatrix::transposed() const {
  auto t = triplets();
  for (auto& e : t) std::swap(e.row, e.col);
  return from_triplets(n_cols_, n_rows_, std::move(t));
}

SparseMatrix SparseMatrix::row_normalized() const {
  SparseMatrix out(n_rows_, n_cols_);
  const auto sums = row_sums();
  for (std::size_t r = 0; r < n_rows_; ++r) {
    if (sums[r] > 0.0) {
      for (std::size_t p = row_ptr_[r]; p < row_ptr_[r + 1]; ++p) {
        out.col_idx_.push_back(col_idx_[p]);
        out.values_.push_back(values_[p] / sums[r]);
      }
    }
    out.row_ptr_[r + 1] = out.values_.size();
  }
  return out;
}

SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("hadamard: shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  std::vector<Triplet> out;
  for (const auto& t : a.triplets()) {
    const double v = t.value * b.at(t.row, t.col);
    if (v != 0.0) out.push_back({t.row, t.col, v});
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(out));
}

void write_sparse(const SparseMatrix& m, std::ostream& out) {
  out << "# uagc-sparse v1 rows=" << m.rows() << " cols=" << m.cols() << '\n';
  for (const auto& t : m.triplets())
    out << t.row << ',' << t.col << ',' << format_double(t.value) << '\n';
}

SparseMatrix read_sparse(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("sparse file: missing header");
  const auto header = split(trim(line), ' ');
  if (header.size() != 5 || header[0] != "#" || header[1] != "uagc-sparse" || header[2] != "v1" ||
      header[3].substr(0, 5) != "rows=" || header[4].substr(0, 5) != "cols=")
    throw InputError("sparse file line 1: bad header");
  const auto rows = static_cast<std::size_t>(parse_u64(header[3].substr(5)));
  const auto cols = static_cast<std::size_t>(parse_u64(header[4].substr(5)));
  std::vector<Triplet> entries;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto f = split(t, ',');
    try {
      if (f.size() != 3) throw InputError("expected i,j,value");
      entries.push_back({static_cast<std::uint32_t>(parse_u64(f[0])),
                         static_cast<std::uint32_t>(parse_u64(f[1])), parse_double(f[2])});
    } catch (const InputError& e) {
      throw InputError("sparse file line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(entries));
}

}  // namespace uagc
