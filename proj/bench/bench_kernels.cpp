// Serial reference kernels against their OpenMP versions. Run with
// OMP_NUM_THREADS set to compare thread counts; results are bit-identical,
// only the time differs.

#include <numeric>
#include <vector>

#include <benchmark/benchmark.h>

#include "uagc/kernels.hpp"
#include "uagc/rng.hpp"

namespace k = uagc::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  uagc::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

using Gemm = void (*)(const double*, const double*, double*, std::size_t, std::size_t, std::size_t);

// m x k times k x n; sized like a batch of gconv inputs (B*N rows).
template <Gemm gemm>
void bm_gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0)), kk = static_cast<std::size_t>(state.range(1)),
             n = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * kk, 1), b = random_values(kk * n, 2);
  std::vector<double> c(m * n);
  for (auto _ : state) {
    std::fill(c.begin(), c.end(), 0.0);
    gemm(a.data(), b.data(), c.data(), m, kk, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * kk * n));
}

#define GEMM_ARGS Args({640, 64, 64})->Args({6624, 66, 128})->Args({6624, 96, 64})
BENCHMARK(bm_gemm<k::serial::gemm_nn>)->Name("gemm_nn/serial")->GEMM_ARGS;
BENCHMARK(bm_gemm<k::parallel::gemm_nn>)->Name("gemm_nn/parallel")->GEMM_ARGS;
BENCHMARK(bm_gemm<k::serial::gemm_nt>)->Name("gemm_nt/serial")->GEMM_ARGS;
BENCHMARK(bm_gemm<k::parallel::gemm_nt>)->Name("gemm_nt/parallel")->GEMM_ARGS;
BENCHMARK(bm_gemm<k::serial::gemm_tn>)->Name("gemm_tn/serial")->GEMM_ARGS;
BENCHMARK(bm_gemm<k::parallel::gemm_tn>)->Name("gemm_tn/parallel")->GEMM_ARGS;

// Random sparse N x N operator with ~`degree` entries per row, applied to
// `batch` slices of width `width` (a walk step over B x N x D activations).
struct Csr {
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;
  k::CsrView view(std::size_t n) const { return {n, n, row_ptr, col_idx, values}; }
};

Csr random_csr(std::size_t n, std::size_t degree, std::uint64_t seed) {
  uagc::Rng rng(seed);
  Csr s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c)
      if (rng.uniform() * n < degree) {
        s.col_idx.push_back(static_cast<std::uint32_t>(c));
        s.values.push_back(rng.uniform());
      }
    s.row_ptr.push_back(s.col_idx.size());
  }
  return s;
}

template <void (*spmm)(const k::CsrView&, const double*, double*, std::size_t, std::size_t)>
void bm_spmm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t batch = 32, width = 64;
  const auto s = random_csr(n, 40, 3);
  const auto x = random_values(batch * n * width, 4);
  std::vector<double> y(x.size());
  for (auto _ : state) {
    std::fill(y.begin(), y.end(), 0.0);
    spmm(s.view(n), x.data(), y.data(), batch, width);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * s.values.size() * batch * width));
}

BENCHMARK(bm_spmm<k::serial::spmm>)->Name("spmm/serial")->Arg(207)->Arg(325);
BENCHMARK(bm_spmm<k::parallel::spmm>)->Name("spmm/parallel")->Arg(207)->Arg(325);

using Nearest = std::vector<k::Nearest> (*)(std::span<const uagc::LatLon>, std::span<const std::uint32_t>,
                                            std::span<const uagc::LatLon>);

// Sensor snapping: every query against every road node.
template <Nearest nearest>
void bm_nearest(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  uagc::Rng rng(5);
  std::vector<uagc::LatLon> nodes(n), queries(207);
  for (auto& p : nodes) p = {34.0 + rng.uniform(0.0, 0.3), -118.5 + rng.uniform(0.0, 0.4)};
  for (auto& p : queries) p = {34.0 + rng.uniform(0.0, 0.3), -118.5 + rng.uniform(0.0, 0.4)};
  std::vector<std::uint32_t> rank(n);
  std::iota(rank.begin(), rank.end(), 0u);
  for (auto _ : state) benchmark::DoNotOptimize(nearest(nodes, rank, queries));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * queries.size()));
}

BENCHMARK(bm_nearest<k::serial::nearest_nodes>)->Name("nearest/serial")->Arg(10000)->Arg(50000);
BENCHMARK(bm_nearest<k::parallel::nearest_nodes>)->Name("nearest/parallel")->Arg(10000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
