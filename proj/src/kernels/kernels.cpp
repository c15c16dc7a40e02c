#include "uagc/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uagc::kernels {

namespace {

// Rows [i0, i1) of C += A * B, register-tiled. Every output element sums
// its k products in order into a zeroed accumulator which is then added to
// C, so the result does not depend on how rows are split across threads.
#if defined(__AVX512F__)
constexpr std::size_t kLanes = 8;
#else
constexpr std::size_t kLanes = 4;
#endif
typedef double vec_t __attribute__((vector_size(kLanes * sizeof(double))));
constexpr std::size_t kTileRows = 8;
constexpr std::size_t kTileCols = 2 * kLanes;

inline vec_t load(const double* p) {
  vec_t v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void add_store(double* p, vec_t v) {
  vec_t o;
  std::memcpy(&o, p, sizeof o);
  o += v;
  std::memcpy(p, &o, sizeof o);
}

// A element (r, p) lives at a[r * rs + p * cs], which lets A^T B run without
// materialising the transpose.
template <std::size_t R>
inline void gemm_tile(const double* __restrict a, std::size_t rs, std::size_t cs,
                      const double* __restrict b, double* __restrict c, std::size_t k,
                      std::size_t n, std::size_t j) {
  vec_t acc0[R] = {}, acc1[R] = {};
  for (std::size_t p = 0; p < k; ++p) {
    const vec_t b0 = load(b + p * n + j);
    const vec_t b1 = load(b + p * n + j + kLanes);
#pragma GCC unroll 8
    for (std::size_t r = 0; r < R; ++r) {
      const double v = a[r * rs + p * cs];
      acc0[r] += v * b0;
      acc1[r] += v * b1;
    }
  }
#pragma GCC unroll 8
  for (std::size_t r = 0; r < R; ++r) {
    add_store(c + r * n + j, acc0[r]);
    add_store(c + r * n + j + kLanes, acc1[r]);
  }
}

template <std::size_t R>
inline void gemm_tail(const double* a, std::size_t rs, std::size_t cs, const double* b, double* c,
                      std::size_t k, std::size_t n, std::size_t j) {
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t jj = j; jj < n; ++jj) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[r * rs + p * cs] * b[p * n + jj];
      c[r * n + jj] += acc;
    }
}

template <std::size_t R>
inline void gemm_row_block(const double* a, std::size_t rs, std::size_t cs, const double* b,
                           double* c, std::size_t k, std::size_t n) {
  std::size_t j = 0;
  for (; j + kTileCols <= n; j += kTileCols) gemm_tile<R>(a, rs, cs, b, c, k, n, j);
  if (j < n) gemm_tail<R>(a, rs, cs, b, c, k, n, j);
}

// Rows [i0, i1) of C (m x n) += op(A) B with op(A)(r, p) = a[r * rs + p * cs].
inline void gemm_rows(const double* a, std::size_t rs, std::size_t cs, const double* b, double* c,
                      std::size_t i0, std::size_t i1, std::size_t k, std::size_t n) {
  std::size_t i = i0;
  for (; i + kTileRows <= i1; i += kTileRows)
    gemm_row_block<kTileRows>(a + i * rs, rs, cs, b, c + i * n, k, n);
  for (; i < i1; ++i) gemm_row_block<1>(a + i * rs, rs, cs, b, c + i * n, k, n);
}

inline void gemm_nn_rows(const double* a, const double* b, double* c, std::size_t i0,
                         std::size_t i1, std::size_t k, std::size_t n) {
  gemm_rows(a, k, 1, b, c, i0, i1, k, n);
}

std::vector<double> transposed(const double* x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  return t;
}

inline void spmm_row(const CsrView& s, const double* x, double* y, std::size_t b, std::size_t r,
                     std::size_t width) {
  const double* xb = x + b * s.n_cols * width;
  double* yr = y + (b * s.n_rows + r) * width;
  for (std::size_t p = s.row_ptr[r]; p < s.row_ptr[r + 1]; ++p) {
    const double v = s.values[p];
    const double* xr = xb + static_cast<std::size_t>(s.col_idx[p]) * width;
    for (std::size_t j = 0; j < width; ++j) yr[j] += v * xr[j];
  }
}

inline Nearest nearest_one(std::span<const LatLon> nodes, std::span<const std::uint32_t> rank,
                           LatLon q) {
  Nearest best{0, std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double d = haversine_miles(q, nodes[i]);
    if (d < best.distance || (d == best.distance && rank[i] < rank[best.node])) {
      best.node = static_cast<NodeIndex>(i);
      best.distance = d;
    }
  }
  return best;
}

constexpr std::size_t kRowBlock = kTileRows;

}  // namespace

// ---- serial reference ------------------------------------------------------

namespace serial {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  gemm_nn_rows(a, b, c, 0, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  const auto bt = transposed(b, n, k);
  gemm_nn_rows(a, bt.data(), c, 0, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  gemm_rows(a, 1, k, b, c, 0, k, m, n);
}

void spmm(const CsrView& s, const double* x, double* y, std::size_t batch, std::size_t width) {
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t r = 0; r < s.n_rows; ++r) spmm_row(s, x, y, b, r, width);
}

std::vector<Nearest> nearest_nodes(std::span<const LatLon> nodes,
                                   std::span<const std::uint32_t> rank,
                                   std::span<const LatLon> queries) {
  std::vector<Nearest> out(queries.size());
  for (std::size_t q = 0; q < queries.size(); ++q) out[q] = nearest_one(nodes, rank, queries[q]);
  return out;
}

}  // namespace serial

// ---- OpenMP ----------------------------------------------------------------

namespace parallel {

namespace {

void gemm_blocked(const double* a, std::size_t rs, std::size_t cs, const double* b, double* c,
                  std::size_t m, std::size_t k, std::size_t n) {
  const auto blocks = static_cast<std::ptrdiff_t>((m + kRowBlock - 1) / kRowBlock);
  // Tiny products are not worth a parallel region.
  if (blocks < 2 || m * k * n < 32768 || max_threads() < 2) {
    gemm_rows(a, rs, cs, b, c, 0, m, k, n);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t i0 = static_cast<std::size_t>(blk) * kRowBlock;
    gemm_rows(a, rs, cs, b, c, i0, std::min(m, i0 + kRowBlock), k, n);
  }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  gemm_blocked(a, k, 1, b, c, m, k, n);
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  const auto bt = transposed(b, n, k);
  gemm_blocked(a, k, 1, bt.data(), c, m, k, n);
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  gemm_blocked(a, 1, k, b, c, k, m, n);
}

void spmm(const CsrView& s, const double* x, double* y, std::size_t batch, std::size_t width) {
  const auto total = static_cast<std::ptrdiff_t>(batch * s.n_rows);
#pragma omp parallel for schedule(static) if (total * static_cast<std::ptrdiff_t>(width) > 16384)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    const auto b = static_cast<std::size_t>(t) / s.n_rows;
    const auto r = static_cast<std::size_t>(t) % s.n_rows;
    spmm_row(s, x, y, b, r, width);
  }
}

std::vector<Nearest> nearest_nodes(std::span<const LatLon> nodes,
                                   std::span<const std::uint32_t> rank,
                                   std::span<const LatLon> queries) {
  std::vector<Nearest> out(queries.size());
  const auto count = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::ptrdiff_t q = 0; q < count; ++q) out[q] = nearest_one(nodes, rank, queries[q]);
  return out;
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace uagc::kernels
