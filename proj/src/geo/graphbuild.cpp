#include "uagc/graphbuild.hpp"

#include <cmath>
#include <deque>
#include <numeric>

#include "uagc/error.hpp"
#include "uagc/kernels.hpp"

namespace uagc {

double distance_kernel(double dist_miles, double sigma_miles, double kappa_miles) {
  if (!(dist_miles < kappa_miles)) return 0.0;
  return std::exp(-(dist_miles * dist_miles) / (sigma_miles * sigma_miles));
}

SparseMatrix distance_adjacency(const RoadGraph& graph, const std::vector<Sensor>& sensors,
                                double sigma_miles, double kappa_miles, int threads) {
  if (!(sigma_miles > 0.0)) throw UsageError("sigma must be positive");
  if (!(kappa_miles > 0.0)) throw UsageError("kappa must be positive");
  const std::size_t n = sensors.size();
  for (const auto& s : sensors)
    if (!s.snapped_node) throw InputError("sensor '" + s.id + "' is not snapped");

  // One bounded Dijkstra per source sensor; rows are independent.
  std::vector<std::vector<Triplet>> rows(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : kernels::max_threads())
  for (std::ptrdiff_t ii = 0; ii < count; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const auto dist = shortest_distances(graph, *sensors[i].snapped_node, 1.0, kappa_miles);
    for (std::size_t j = 0; j < n; ++j) {
      const double d = i == j ? 0.0 : dist[*sensors[j].snapped_node];
      const double w = distance_kernel(d, sigma_miles, kappa_miles);
      if (w > 0.0)
        rows[i].push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), w});
    }
  }
  std::vector<Triplet> all;
  for (auto& r : rows) all.insert(all.end(), r.begin(), r.end());
  return SparseMatrix::from_triplets(n, n, std::move(all));
}

SparseMatrix cooccurrence_matrix(const PathSet& paths) {
  const std::size_t n = paths.sensor_count();
  std::vector<Triplet> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (paths.appear(i) == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const auto co = paths.coappear(i, j);
      if (co == 0 || paths.appear(j) == 0) continue;
      const double denom = std::sqrt(static_cast<double>(paths.appear(i)) *
                                     static_cast<double>(paths.appear(j)));
      out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                     static_cast<double>(co) / denom});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(out));
}

SensorAdjacency combine_adjacency(SparseMatrix dist, SparseMatrix cooc, double sigma_miles,
                                  double kappa_miles) {
  if (dist.rows() != dist.cols()) throw ShapeError("distance adjacency is not square");
  SensorAdjacency adj;
  adj.combined = hadamard(dist, cooc);
  adj.fwd = adj.combined.row_normalized();
  adj.bwd = adj.combined.transposed().row_normalized();
  adj.dist = std::move(dist);
  adj.cooc = std::move(cooc);
  adj.sigma_miles = sigma_miles;
  adj.kappa_miles = kappa_miles;
  return adj;
}

SensorAdjacency adjacency_from_matrix(const SparseMatrix& a) {
  SensorAdjacency adj;
  adj.combined = a;
  adj.fwd = a.row_normalized();
  adj.bwd = a.transposed().row_normalized();
  return adj;
}

Centrality betweenness_centrality(const SparseMatrix& a) {
  const std::size_t n = a.rows();
  Centrality out;
  out.per_node.assign(n, 0.0);
  if (n < 3) return out;

  std::vector<std::vector<std::size_t>> succ(n);
  for (const auto& t : a.triplets())
    if (t.row != t.col && t.value != 0.0) succ[t.row].push_back(t.col);

  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(sigma.begin(), sigma.end(), 0.0);
    std::fill(delta.begin(), delta.end(), 0.0);
    std::fill(dist.begin(), dist.end(), -1L);
    for (auto& p : pred) p.clear();
    order.clear();

    sigma[s] = 1.0;
    dist[s] = 0;
    std::deque<std::size_t> queue{s};
    while (!queue.empty()) {
      const auto v = queue.front();
      queue.pop_front();
      order.push_back(v);
      for (const auto w : succ[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          queue.push_back(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const auto w = *it;
      for (const auto v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) out.per_node[w] += delta[w];
    }
  }
  const double norm = static_cast<double>(n - 1) * static_cast<double>(n - 2);
  for (auto& b : out.per_node) b /= norm;
  out.mean = std::accumulate(out.per_node.begin(), out.per_node.end(), 0.0) / static_cast<double>(n);
  return out;
}

}  // namespace uagc
