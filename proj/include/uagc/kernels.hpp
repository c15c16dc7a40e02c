#pragma once

// Data-parallel numeric kernels. Every kernel exists twice: a plain serial
// reference and an OpenMP version. Both produce bit-identical results for any
// thread count: work is split over output rows only and every output element
// is accumulated in the same order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uagc/geodata.hpp"

namespace uagc::kernels {

/// Compressed sparse row view used by spmm.
struct CsrView {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::span<const std::size_t> row_ptr;
  std::span<const std::uint32_t> col_idx;
  std::span<const double> values;
};

struct Nearest {
  NodeIndex node = 0;
  double distance = 0.0;
};

namespace serial {

/// C[m,n] += A[m,k] * B[k,n], all row-major.
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// C[m,n] += A[m,k] * B[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// C[k,n] += A[m,k]^T * B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// Y[b] += S * X[b] for each of `batch` slices; X[b] is (S.n_cols x width).
void spmm(const CsrView& s, const double* x, double* y, std::size_t batch, std::size_t width);
/// Nearest node per query by haversine distance; ties go to the smaller rank.
std::vector<Nearest> nearest_nodes(std::span<const LatLon> nodes,
                                   std::span<const std::uint32_t> rank,
                                   std::span<const LatLon> queries);

}  // namespace serial

namespace parallel {

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
void spmm(const CsrView& s, const double* x, double* y, std::size_t batch, std::size_t width);
std::vector<Nearest> nearest_nodes(std::span<const LatLon> nodes,
                                   std::span<const std::uint32_t> rank,
                                   std::span<const LatLon> queries);

}  // namespace parallel

// Default dispatch used by the rest of the library.
using parallel::gemm_nn;
using parallel::gemm_nt;
using parallel::gemm_tn;
using parallel::nearest_nodes;
using parallel::spmm;

/// Threads OpenMP will use (1 when built without OpenMP).
int max_threads();
void set_threads(int n);

}  // namespace uagc::kernels
