#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace uagc {

inline constexpr double kEarthRadiusMiles = 3958.8;

using NodeIndex = std::uint32_t;
using EdgeIndex = std::uint32_t;

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

/// Great-circle distance in miles.
double haversine_miles(LatLon a, LatLon b);

struct RoadNode {
  std::string id;
  LatLon pos;
};

/// Edge as read from a file: endpoints given by node id.
struct EdgeRecord {
  std::string id;
  std::string from;
  std::string to;
  double length_miles = 0.0;
  bool is_freeway = false;
};

struct RoadEdge {
  std::string id;
  NodeIndex from = 0;
  NodeIndex to = 0;
  double length_miles = 0.0;
  bool is_freeway = false;
};

/// Directed road network. Immutable after construction.
class RoadGraph {
 public:
  RoadGraph() = default;

  /// Validates ids, endpoints, lengths and coordinates; throws InputError.
  static RoadGraph build(std::vector<RoadNode> nodes, const std::vector<EdgeRecord>& edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return nodes_.empty(); }

  const std::vector<RoadNode>& nodes() const { return nodes_; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const RoadNode& node(NodeIndex i) const { return nodes_[i]; }
  const RoadEdge& edge(EdgeIndex e) const { return edges_[e]; }

  std::span<const EdgeIndex> out_edges(NodeIndex n) const {
    return {out_edges_.data() + out_offsets_[n], out_offsets_[n + 1] - out_offsets_[n]};
  }

  std::optional<NodeIndex> find(std::string_view id) const;
  NodeIndex index_of(std::string_view id) const;  // throws InputError for unknown ids

  /// Position of the node's id in lexicographic order; used for tie-breaking.
  std::uint32_t id_rank(NodeIndex n) const { return id_rank_[n]; }

  /// min(1, min over edges of length / straight-line length). Scaling the
  /// straight-line heuristic by this keeps A* admissible on any input.
  double heuristic_scale() const { return heuristic_scale_; }

 private:
  std::vector<RoadNode> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<std::size_t> out_offsets_;
  std::vector<EdgeIndex> out_edges_;
  std::vector<std::uint32_t> id_rank_;
  std::unordered_map<std::string, NodeIndex> index_;
  double heuristic_scale_ = 1.0;
};

bool operator==(const RoadGraph& a, const RoadGraph& b);

// ---- canonical CSV ---------------------------------------------------------

/// nodes: `node_id,lat,lon`; edges: `edge_id,from_node,to_node,length_miles,is_freeway`.
RoadGraph parse_edge_csv(std::istream& nodes_file, std::istream& edges_file);
void write_edge_csv(const RoadGraph& graph, std::ostream& nodes_file, std::ostream& edges_file);

// ---- OpenStreetMap XML -----------------------------------------------------

const std::set<std::string>& default_highway_filter();

/// Converts `.osm` XML into a RoadGraph. An empty filter keeps every way that
/// carries a highway tag.
RoadGraph parse_osm_xml(std::istream& osm_file, const std::set<std::string>& highway_filter);

// ---- sensors ---------------------------------------------------------------

struct Sensor {
  std::string id;
  LatLon pos;
  std::optional<NodeIndex> snapped_node;
  double snap_distance_miles = 0.0;
};

/// `sensor_id,lat,lon`
std::vector<Sensor> parse_sensor_csv(std::istream& in);
void write_sensor_csv(const std::vector<Sensor>& sensors, std::ostream& out);

/// Snaps each sensor to its nearest node (haversine); ties go to the
/// lexicographically smallest node id.
std::vector<Sensor> snap_sensors(const RoadGraph& graph, std::vector<Sensor> sensors);

// ---- shortest paths --------------------------------------------------------

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Single-source Dijkstra over edge lengths scaled by `freeway_coefficient` on
/// freeway edges. Distances beyond `max_distance` are reported as kUnreachable.
std::vector<double> shortest_distances(const RoadGraph& graph, NodeIndex source,
                                       double freeway_coefficient = 1.0,
                                       double max_distance = kUnreachable);

/// Directed along-road distance; std::nullopt when dst cannot be reached.
std::optional<double> road_distance_miles(const RoadGraph& graph, std::string_view src_node,
                                          std::string_view dst_node);

}  // namespace uagc
