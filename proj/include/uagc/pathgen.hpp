#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "uagc/geodata.hpp"

namespace uagc {

inline constexpr double kMilesPerDegreeLat = 69.09;

/// Square-cell partition of the (padded) sensor bounding box. Row 0 is the
/// southern-most row, column 0 the western-most column.
class Grid {
 public:
  LatLon origin;  // south-west corner
  double cell_size_miles = 0.0;
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  double miles_per_deg_lat = kMilesPerDegreeLat;
  double miles_per_deg_lon = kMilesPerDegreeLat;

  std::size_t cell_count() const { return n_rows * n_cols; }

  /// Cell containing `p`, or nullopt outside the grid rectangle.
  std::optional<std::size_t> cell_of(LatLon p) const;

  /// Graph nodes per cell, ascending node index. Nodes outside the grid are dropped.
  std::vector<std::vector<NodeIndex>> assign_nodes(const RoadGraph& graph) const;
};

/// Bounding box of the sensors expanded by `padding_miles` on every side; cell
/// counts are ceil(extent / cell_size) per axis (at least 1).
Grid make_grid(const std::vector<Sensor>& sensors, double cell_size_miles, double padding_miles);

struct TravelPath {
  std::vector<NodeIndex> nodes;
  std::vector<EdgeIndex> edges;
  double total_cost = 0.0;
  double freeway_coefficient = 1.0;
  std::size_t origin_cell = 0;
  std::size_t dest_cell = 0;
  std::uint32_t repetition = 0;
};

/// Cost of one edge under a freeway coefficient.
inline double edge_cost(const RoadEdge& e, double freeway_coefficient) {
  return e.length_miles * (e.is_freeway ? freeway_coefficient : 1.0);
}

/// Cost-optimal route with A*. Freeway edges cost length * coefficient; the
/// straight-line heuristic is scaled by the same coefficient. src == dst yields
/// an empty path of cost 0; nullopt means unreachable.
std::optional<TravelPath> astar_route(const RoadGraph& graph, NodeIndex src, NodeIndex dst,
                                      double freeway_coefficient);

struct PathGenConfig {
  std::vector<double> coefficients{1.0, 0.9, 0.8};
  std::uint32_t repetitions = 5;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: OpenMP default
};

/// Generated trajectory set with per-sensor hit statistics.
class PathSet {
 public:
  PathSet() = default;
  PathSet(std::vector<TravelPath> paths, std::size_t n_sensors,
          const std::vector<std::vector<std::size_t>>& sensors_at_node, std::uint64_t seed);

  const std::vector<TravelPath>& paths() const { return paths_; }
  std::size_t sensor_count() const { return appear_.size(); }
  std::uint64_t seed() const { return seed_; }

  /// Sensor indices hit by path p (sorted, unique).
  const std::vector<std::size_t>& hits(std::size_t p) const { return hits_[p]; }

  std::uint64_t appear(std::size_t i) const { return appear_[i]; }
  std::uint64_t coappear(std::size_t i, std::size_t j) const { return coappear_[i * appear_.size() + j]; }

  // Route attempt bookkeeping (not serialised).
  std::size_t attempts = 0;
  std::size_t unreachable = 0;
  std::size_t trivial = 0;

 private:
  std::vector<TravelPath> paths_;
  std::vector<std::vector<std::size_t>> hits_;
  std::vector<std::uint64_t> appear_;
  std::vector<std::uint64_t> coappear_;
  std::uint64_t seed_ = 0;
};

/// Sensors grouped by the node they snapped to.
std::vector<std::vector<std::size_t>> sensors_by_node(const RoadGraph& graph,
                                                      const std::vector<Sensor>& sensors);

/// For every ordered pair of non-empty cells and every repetition, draw one
/// origin and one destination node and route them once per coefficient.
/// Paths with at least one edge are kept, sorted by (origin, dest, rep, coefficient index).
PathSet generate_path_set(const RoadGraph& graph, const Grid& grid,
                          const std::vector<Sensor>& sensors, const PathGenConfig& config);

/// `# uagc-paths v1 seed=<u64>` then `origin;dest;rep;coefficient;node,node,...`.
void write_path_set(const PathSet& paths, const RoadGraph& graph, std::ostream& out);
PathSet read_path_set(std::istream& in, const RoadGraph& graph, const std::vector<Sensor>& sensors);

}  // namespace uagc
