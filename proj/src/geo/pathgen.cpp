#include "uagc/pathgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <istream>
#include <ostream>
#include <queue>
#include <string>

#include "uagc/error.hpp"
#include "uagc/kernels.hpp"
#include "uagc/rng.hpp"
#include "uagc/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace uagc {

// ---- Grid ------------------------------------------------------------------

std::optional<std::size_t> Grid::cell_of(LatLon p) const {
  constexpr double kSlack = 1e-9;
  const double y = (p.lat - origin.lat) * miles_per_deg_lat / cell_size_miles;
  const double x = (p.lon - origin.lon) * miles_per_deg_lon / cell_size_miles;
  if (!(y >= -kSlack && y <= static_cast<double>(n_rows) + kSlack)) return std::nullopt;
  if (!(x >= -kSlack && x <= static_cast<double>(n_cols) + kSlack)) return std::nullopt;
  const auto clamp_index = [](double v, std::size_t n) {
    const double f = std::floor(v);
    if (f < 0.0) return std::size_t{0};
    return std::min(static_cast<std::size_t>(f), n - 1);
  };
  return clamp_index(y, n_rows) * n_cols + clamp_index(x, n_cols);
}

std::vector<std::vector<NodeIndex>> Grid::assign_nodes(const RoadGraph& graph) const {
  std::vector<std::vector<NodeIndex>> cells(cell_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    const auto n = static_cast<NodeIndex>(i);
    if (const auto c = cell_of(graph.node(n).pos)) cells[*c].push_back(n);
  }
  return cells;
}

Grid make_grid(const std::vector<Sensor>& sensors, double cell_size_miles, double padding_miles) {
  if (!(cell_size_miles > 0.0)) throw UsageError("grid cell size must be positive");
  if (!(padding_miles >= 0.0)) throw UsageError("grid padding must be non-negative");
  if (sensors.empty()) throw InputError("cannot build a grid without sensors");

  double min_lat = sensors.front().pos.lat, max_lat = min_lat;
  double min_lon = sensors.front().pos.lon, max_lon = min_lon;
  double sum_lat = 0.0;
  for (const auto& s : sensors) {
    min_lat = std::min(min_lat, s.pos.lat);
    max_lat = std::max(max_lat, s.pos.lat);
    min_lon = std::min(min_lon, s.pos.lon);
    max_lon = std::max(max_lon, s.pos.lon);
    sum_lat += s.pos.lat;
  }
  const double mean_lat = sum_lat / static_cast<double>(sensors.size());

  Grid g;
  g.cell_size_miles = cell_size_miles;
  g.miles_per_deg_lat = kMilesPerDegreeLat;
  g.miles_per_deg_lon = kMilesPerDegreeLat * std::cos(mean_lat * std::numbers::pi / 180.0);
  const double height = (max_lat - min_lat) * g.miles_per_deg_lat + 2.0 * padding_miles;
  const double width = (max_lon - min_lon) * g.miles_per_deg_lon + 2.0 * padding_miles;
  // The slack absorbs degree<->mile round-off so exact multiples do not gain a cell.
  const auto cells = [&](double extent) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / cell_size_miles - 1e-9)));
  };
  g.n_rows = cells(height);
  g.n_cols = cells(width);
  g.origin = LatLon{min_lat - padding_miles / g.miles_per_deg_lat,
                    min_lon - padding_miles / g.miles_per_deg_lon};
  return g;
}

// ---- A* --------------------------------------------------------------------

namespace {

constexpr EdgeIndex kNoEdge = static_cast<EdgeIndex>(-1);

// Reusable search state; only touched entries are reset between queries.
class SearchSpace {
 public:
  explicit SearchSpace(std::size_t n) : g_(n, kUnreachable), parent_(n, kNoEdge) {}

  double g(NodeIndex n) const { return g_[n]; }
  EdgeIndex parent(NodeIndex n) const { return parent_[n]; }

  void set(NodeIndex n, double g, EdgeIndex parent) {
    if (g_[n] == kUnreachable) touched_.push_back(n);
    g_[n] = g;
    parent_[n] = parent;
  }

  void reset() {
    for (auto n : touched_) {
      g_[n] = kUnreachable;
      parent_[n] = kNoEdge;
    }
    touched_.clear();
  }

 private:
  std::vector<double> g_;
  std::vector<EdgeIndex> parent_;
  std::vector<NodeIndex> touched_;
};

struct Frontier {
  double f;
  std::uint32_t rank;
  double g;
  NodeIndex node;
  bool operator>(const Frontier& o) const {
    if (f != o.f) return f > o.f;
    return rank > o.rank;
  }
};

std::optional<TravelPath> astar_impl(const RoadGraph& graph, NodeIndex src, NodeIndex dst,
                                     double coefficient, SearchSpace& space) {
  TravelPath path;
  path.freeway_coefficient = coefficient;
  if (src == dst) return path;

  const LatLon target = graph.node(dst).pos;
  const double h_scale = coefficient * graph.heuristic_scale();
  const auto h = [&](NodeIndex n) { return haversine_miles(graph.node(n).pos, target) * h_scale; };

  space.reset();
  std::priority_queue<Frontier, std::vector<Frontier>, std::greater<>> open;
  space.set(src, 0.0, kNoEdge);
  open.push(Frontier{h(src), graph.id_rank(src), 0.0, src});
  bool found = false;
  while (!open.empty()) {
    const Frontier top = open.top();
    open.pop();
    if (top.g > space.g(top.node)) continue;  // stale entry
    if (top.node == dst) {
      found = true;
      break;
    }
    for (const auto e : graph.out_edges(top.node)) {
      const auto& edge = graph.edge(e);
      const double ng = top.g + edge_cost(edge, coefficient);
      if (ng < space.g(edge.to)) {
        space.set(edge.to, ng, e);
        open.push(Frontier{ng + h(edge.to), graph.id_rank(edge.to), ng, edge.to});
      }
    }
  }
  if (!found) return std::nullopt;

  for (NodeIndex n = dst; n != src;) {
    const EdgeIndex e = space.parent(n);
    path.edges.push_back(e);
    path.nodes.push_back(n);
    n = graph.edge(e).from;
  }
  path.nodes.push_back(src);
  std::reverse(path.nodes.begin(), path.nodes.end());
  std::reverse(path.edges.begin(), path.edges.end());
  for (const auto e : path.edges) path.total_cost += edge_cost(graph.edge(e), coefficient);
  return path;
}

void check_coefficient(double c) {
  if (!(c > 0.0 && c <= 1.0)) throw UsageError("freeway coefficient must be in (0, 1]");
}

}  // namespace

std::optional<TravelPath> astar_route(const RoadGraph& graph, NodeIndex src, NodeIndex dst,
                                      double freeway_coefficient) {
  check_coefficient(freeway_coefficient);
  if (src >= graph.node_count() || dst >= graph.node_count())
    throw InputError("astar_route: unknown node index");
  SearchSpace space(graph.node_count());
  return astar_impl(graph, src, dst, freeway_coefficient, space);
}

// ---- PathSet ---------------------------------------------------------------

std::vector<std::vector<std::size_t>> sensors_by_node(const RoadGraph& graph,
                                                      const std::vector<Sensor>& sensors) {
  std::vector<std::vector<std::size_t>> at(graph.node_count());
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    if (!sensors[i].snapped_node) throw InputError("sensor '" + sensors[i].id + "' is not snapped");
    at[*sensors[i].snapped_node].push_back(i);
  }
  return at;
}

PathSet::PathSet(std::vector<TravelPath> paths, std::size_t n_sensors,
                 const std::vector<std::vector<std::size_t>>& sensors_at_node, std::uint64_t seed)
    : paths_(std::move(paths)),
      appear_(n_sensors, 0),
      coappear_(n_sensors * n_sensors, 0),
      seed_(seed) {
  hits_.reserve(paths_.size());
  for (const auto& p : paths_) {
    std::vector<std::size_t> hit;
    for (const auto n : p.nodes)
      hit.insert(hit.end(), sensors_at_node[n].begin(), sensors_at_node[n].end());
    std::sort(hit.begin(), hit.end());
    hit.erase(std::unique(hit.begin(), hit.end()), hit.end());
    for (const auto i : hit) {
      ++appear_[i];
      for (const auto j : hit) ++coappear_[i * n_sensors + j];
    }
    hits_.push_back(std::move(hit));
  }
}

PathSet generate_path_set(const RoadGraph& graph, const Grid& grid,
                          const std::vector<Sensor>& sensors, const PathGenConfig& config) {
  if (config.coefficients.empty()) throw UsageError("at least one freeway coefficient is required");
  for (const double c : config.coefficients) check_coefficient(c);
  if (grid.cell_count() == 0) throw UsageError("grid has no cells");

  const auto at_node = sensors_by_node(graph, sensors);
  const auto cells = grid.assign_nodes(graph);

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t o = 0; o < cells.size(); ++o) {
    if (cells[o].empty()) continue;
    for (std::size_t d = 0; d < cells.size(); ++d)
      if (!cells[d].empty()) pairs.emplace_back(o, d);
  }

  struct PairResult {
    std::vector<TravelPath> paths;
    std::size_t attempts = 0, unreachable = 0, trivial = 0;
  };
  std::vector<PairResult> results(pairs.size());
  const auto n_pairs = static_cast<std::ptrdiff_t>(pairs.size());

#pragma omp parallel num_threads(config.threads > 0 ? config.threads : kernels::max_threads())
  {
    SearchSpace space(graph.node_count());
#pragma omp for schedule(dynamic, 8)
    for (std::ptrdiff_t idx = 0; idx < n_pairs; ++idx) {
      const auto [o, d] = pairs[static_cast<std::size_t>(idx)];
      auto& res = results[static_cast<std::size_t>(idx)];
      for (std::uint32_t rep = 0; rep < config.repetitions; ++rep) {
        Rng rng(derive_seed(config.seed, o, d, rep));
        const NodeIndex src = cells[o][rng.below(cells[o].size())];
        const NodeIndex dst = cells[d][rng.below(cells[d].size())];
        for (const double coef : config.coefficients) {
          ++res.attempts;
          auto route = astar_impl(graph, src, dst, coef, space);
          if (!route) {
            ++res.unreachable;
            continue;
          }
          if (route->edges.empty()) {
            ++res.trivial;
            continue;
          }
          route->origin_cell = o;
          route->dest_cell = d;
          route->repetition = rep;
          res.paths.push_back(std::move(*route));
        }
      }
    }
  }

  std::vector<TravelPath> all;
  std::size_t attempts = 0, unreachable = 0, trivial = 0;
  for (auto& r : results) {
    attempts += r.attempts;
    unreachable += r.unreachable;
    trivial += r.trivial;
    for (auto& p : r.paths) all.push_back(std::move(p));
  }
  PathSet set(std::move(all), sensors.size(), at_node, config.seed);
  set.attempts = attempts;
  set.unreachable = unreachable;
  set.trivial = trivial;
  return set;
}

// ---- file format -----------------------------------------------------------

void write_path_set(const PathSet& paths, const RoadGraph& graph, std::ostream& out) {
  out << "# uagc-paths v1 seed=" << paths.seed() << '\n';
  for (const auto& p : paths.paths()) {
    out << p.origin_cell << ';' << p.dest_cell << ';' << p.repetition << ';'
        << format_double(p.freeway_coefficient) << ';';
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      if (i) out << ',';
      out << graph.node(p.nodes[i]).id;
    }
    out << '\n';
  }
}

PathSet read_path_set(std::istream& in, const RoadGraph& graph, const std::vector<Sensor>& sensors) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("path file: missing header");
  constexpr std::string_view kPrefix = "# uagc-paths v1 seed=";
  const auto header = trim(line);
  if (header.substr(0, kPrefix.size()) != kPrefix) throw InputError("path file line 1: bad header");
  const auto seed = parse_u64(header.substr(kPrefix.size()));

  std::vector<TravelPath> paths;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto where = "path file line " + std::to_string(line_no) + ": ";
    const auto fields = split(t, ';');
    if (fields.size() != 5) throw InputError(where + "expected 5 ';'-separated fields");
    TravelPath p;
    try {
      p.origin_cell = static_cast<std::size_t>(parse_u64(fields[0]));
      p.dest_cell = static_cast<std::size_t>(parse_u64(fields[1]));
      p.repetition = static_cast<std::uint32_t>(parse_u64(fields[2]));
      p.freeway_coefficient = parse_double(fields[3]);
      for (const auto id : split(fields[4], ',')) p.nodes.push_back(graph.index_of(trim(id)));
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
    if (!(p.freeway_coefficient > 0.0 && p.freeway_coefficient <= 1.0))
      throw InputError(where + "coefficient outside (0, 1]");
    for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
      EdgeIndex best = kNoEdge;
      double best_cost = kUnreachable;
      for (const auto e : graph.out_edges(p.nodes[i])) {
        const auto& edge = graph.edge(e);
        if (edge.to != p.nodes[i + 1]) continue;
        const double c = edge_cost(edge, p.freeway_coefficient);
        if (c < best_cost) {
          best_cost = c;
          best = e;
        }
      }
      if (best == kNoEdge) throw InputError(where + "consecutive nodes are not joined by an edge");
      p.edges.push_back(best);
      p.total_cost += best_cost;
    }
    paths.push_back(std::move(p));
  }
  return PathSet(std::move(paths), sensors.size(), sensors_by_node(graph, sensors), seed);
}

}  // namespace uagc
