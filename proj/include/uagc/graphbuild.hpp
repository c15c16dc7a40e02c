#pragma once

#include <vector>

#include "uagc/geodata.hpp"
#include "uagc/pathgen.hpp"
#include "uagc/sparse.hpp"

namespace uagc {

inline constexpr double kDefaultSigmaMiles = 5.0;
inline constexpr double kDefaultKappaMiles = 80.0;

/// exp(-dist^2 / sigma^2) when dist < kappa, else 0.
double distance_kernel(double dist_miles, double sigma_miles, double kappa_miles);

/// Gaussian proximity of directed along-road distances between snapped
/// sensors. Unreachable pairs and pairs at or beyond kappa are absent.
SparseMatrix distance_adjacency(const RoadGraph& graph, const std::vector<Sensor>& sensors,
                                double sigma_miles = kDefaultSigmaMiles,
                                double kappa_miles = kDefaultKappaMiles, int threads = 0);

/// coappear(i, j) / sqrt(appear(i) * appear(j)); zero rows and columns for
/// sensors that never appear.
SparseMatrix cooccurrence_matrix(const PathSet& paths);

/// Final adjacency A = A_dist ⊙ A_cooc with its walk-normalised operators.
struct SensorAdjacency {
  SparseMatrix dist;      // A^(D)
  SparseMatrix cooc;      // A^(S)
  SparseMatrix combined;  // A
  SparseMatrix fwd;       // D_out^-1 A
  SparseMatrix bwd;       // D_in^-1 A^T
  double sigma_miles = kDefaultSigmaMiles;
  double kappa_miles = kDefaultKappaMiles;

  std::size_t size() const { return combined.rows(); }
  std::size_t nnz() const { return combined.nnz(); }
};

SensorAdjacency combine_adjacency(SparseMatrix dist, SparseMatrix cooc,
                                  double sigma_miles = kDefaultSigmaMiles,
                                  double kappa_miles = kDefaultKappaMiles);

/// Adjacency whose forward/backward walks come straight from `a` (no factors).
SensorAdjacency adjacency_from_matrix(const SparseMatrix& a);

struct Centrality {
  std::vector<double> per_node;
  double mean = 0.0;
};

/// Normalised betweenness (Brandes) of the directed unweighted graph on the
/// off-diagonal support of `a`, divided by (N-1)(N-2). All zero for N < 3.
Centrality betweenness_centrality(const SparseMatrix& a);

}  // namespace uagc
