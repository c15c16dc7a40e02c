#include "uagc/geodata.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "uagc/error.hpp"
#include "uagc/kernels.hpp"
#include "uagc/text.hpp"

namespace uagc {

double haversine_miles(LatLon a, LatLon b) {
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double s1 = std::sin(dlat / 2.0);
  const double s2 = std::sin(dlon / 2.0);
  const double h = s1 * s1 + std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * s2 * s2;
  return 2.0 * kEarthRadiusMiles * std::asin(std::min(1.0, std::sqrt(h)));
}

// ---- RoadGraph -------------------------------------------------------------

RoadGraph RoadGraph::build(std::vector<RoadNode> nodes, const std::vector<EdgeRecord>& edges) {
  RoadGraph g;
  g.nodes_ = std::move(nodes);
  g.index_.reserve(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const auto& n = g.nodes_[i];
    if (!std::isfinite(n.pos.lat) || !std::isfinite(n.pos.lon) || std::abs(n.pos.lat) > 90.0 ||
        std::abs(n.pos.lon) > 180.0)
      throw InputError("node '" + n.id + "' has invalid coordinates");
    if (!g.index_.emplace(n.id, static_cast<NodeIndex>(i)).second)
      throw InputError("duplicate node_id '" + n.id + "'");
  }

  std::unordered_map<std::string, std::size_t> edge_ids;
  g.edges_.reserve(edges.size());
  for (const auto& e : edges) {
    if (!edge_ids.emplace(e.id, g.edges_.size()).second)
      throw InputError("duplicate edge_id '" + e.id + "'");
    const auto from = g.find(e.from);
    if (!from) throw InputError("edge '" + e.id + "' has dangling endpoint '" + e.from + "'");
    const auto to = g.find(e.to);
    if (!to) throw InputError("edge '" + e.id + "' has dangling endpoint '" + e.to + "'");
    if (!(e.length_miles > 0.0) || !std::isfinite(e.length_miles))
      throw InputError("edge '" + e.id + "' has non-positive length");
    g.edges_.push_back(RoadEdge{e.id, *from, *to, e.length_miles, e.is_freeway});
  }

  g.out_offsets_.assign(g.nodes_.size() + 1, 0);
  for (const auto& e : g.edges_) ++g.out_offsets_[e.from + 1];
  std::partial_sum(g.out_offsets_.begin(), g.out_offsets_.end(), g.out_offsets_.begin());
  g.out_edges_.resize(g.edges_.size());
  auto cursor = g.out_offsets_;
  for (std::size_t e = 0; e < g.edges_.size(); ++e)
    g.out_edges_[cursor[g.edges_[e].from]++] = static_cast<EdgeIndex>(e);

  std::vector<NodeIndex> order(g.nodes_.size());
  std::iota(order.begin(), order.end(), NodeIndex{0});
  std::sort(order.begin(), order.end(),
            [&](NodeIndex a, NodeIndex b) { return g.nodes_[a].id < g.nodes_[b].id; });
  g.id_rank_.resize(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) g.id_rank_[order[r]] = static_cast<std::uint32_t>(r);

  for (const auto& e : g.edges_) {
    const double straight = haversine_miles(g.nodes_[e.from].pos, g.nodes_[e.to].pos);
    if (straight > 0.0) g.heuristic_scale_ = std::min(g.heuristic_scale_, e.length_miles / straight);
  }
  return g;
}

std::optional<NodeIndex> RoadGraph::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

NodeIndex RoadGraph::index_of(std::string_view id) const {
  if (auto i = find(id)) return *i;
  throw InputError("unknown node '" + std::string(id) + "'");
}

bool operator==(const RoadGraph& a, const RoadGraph& b) {
  if (a.node_count() != b.node_count() || a.edge_count() != b.edge_count()) return false;
  for (std::size_t i = 0; i < a.node_count(); ++i) {
    const auto& x = a.node(static_cast<NodeIndex>(i));
    const auto& y = b.node(static_cast<NodeIndex>(i));
    if (x.id != y.id || x.pos.lat != y.pos.lat || x.pos.lon != y.pos.lon) return false;
  }
  for (std::size_t e = 0; e < a.edge_count(); ++e) {
    const auto& x = a.edge(static_cast<EdgeIndex>(e));
    const auto& y = b.edge(static_cast<EdgeIndex>(e));
    if (x.id != y.id || x.from != y.from || x.to != y.to || x.length_miles != y.length_miles ||
        x.is_freeway != y.is_freeway)
      return false;
  }
  return true;
}

// ---- CSV -------------------------------------------------------------------

namespace {

class CsvReader {
 public:
  CsvReader(std::istream& in, std::string_view expected_header, std::string_view what)
      : in_(in), what_(what) {
    std::string header;
    if (!std::getline(in_, header)) throw InputError(std::string(what_) + ": missing header");
    line_no_ = 1;
    if (trim(header) != expected_header)
      throw InputError(std::string(what_) + " line 1: expected header '" +
                       std::string(expected_header) + "'");
  }

  // Next non-blank row split into exactly `fields` fields.
  bool next(std::vector<std::string_view>& out, std::size_t fields) {
    while (std::getline(in_, line_)) {
      ++line_no_;
      const auto t = trim(line_);
      if (t.empty()) continue;
      out = split(t, ',');
      if (out.size() != fields)
        fail("expected " + std::to_string(fields) + " fields, got " + std::to_string(out.size()));
      for (auto& f : out) f = trim(f);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError(std::string(what_) + " line " + std::to_string(line_no_) + ": " + msg);
  }

  double number(std::string_view field) const {
    try {
      return parse_double(field);
    } catch (const InputError& e) {
      fail(e.what());
    }
  }

 private:
  std::istream& in_;
  std::string_view what_;
  std::string line_;
  std::size_t line_no_ = 0;
};

}  // namespace

RoadGraph parse_edge_csv(std::istream& nodes_file, std::istream& edges_file) {
  std::vector<RoadNode> nodes;
  {
    CsvReader reader(nodes_file, "node_id,lat,lon", "nodes csv");
    std::vector<std::string_view> f;
    while (reader.next(f, 3)) {
      if (f[0].empty()) reader.fail("empty node_id");
      nodes.push_back(RoadNode{std::string(f[0]), LatLon{reader.number(f[1]), reader.number(f[2])}});
    }
  }
  std::vector<EdgeRecord> edges;
  {
    CsvReader reader(edges_file, "edge_id,from_node,to_node,length_miles,is_freeway", "edges csv");
    std::vector<std::string_view> f;
    while (reader.next(f, 5)) {
      if (f[0].empty()) reader.fail("empty edge_id");
      if (f[4] != "0" && f[4] != "1") reader.fail("is_freeway must be 0 or 1");
      const double len = reader.number(f[3]);
      if (!(len > 0.0)) reader.fail("non-positive length_miles");
      edges.push_back(EdgeRecord{std::string(f[0]), std::string(f[1]), std::string(f[2]), len,
                                 f[4] == "1"});
    }
  }
  return RoadGraph::build(std::move(nodes), edges);
}

void write_edge_csv(const RoadGraph& graph, std::ostream& nodes_file, std::ostream& edges_file) {
  nodes_file << "node_id,lat,lon\n";
  for (const auto& n : graph.nodes())
    nodes_file << n.id << ',' << format_double(n.pos.lat) << ',' << format_double(n.pos.lon) << '\n';
  edges_file << "edge_id,from_node,to_node,length_miles,is_freeway\n";
  for (const auto& e : graph.edges())
    edges_file << e.id << ',' << graph.node(e.from).id << ',' << graph.node(e.to).id << ','
               << format_double(e.length_miles) << ',' << (e.is_freeway ? 1 : 0) << '\n';
}

std::vector<Sensor> parse_sensor_csv(std::istream& in) {
  CsvReader reader(in, "sensor_id,lat,lon", "sensors csv");
  std::vector<Sensor> sensors;
  std::vector<std::string_view> f;
  std::unordered_map<std::string, int> seen;
  while (reader.next(f, 3)) {
    if (f[0].empty()) reader.fail("empty sensor_id");
    if (!seen.emplace(std::string(f[0]), 0).second)
      reader.fail("duplicate sensor_id '" + std::string(f[0]) + "'");
    Sensor s;
    s.id = std::string(f[0]);
    s.pos = LatLon{reader.number(f[1]), reader.number(f[2])};
    sensors.push_back(std::move(s));
  }
  return sensors;
}

void write_sensor_csv(const std::vector<Sensor>& sensors, std::ostream& out) {
  out << "sensor_id,lat,lon\n";
  for (const auto& s : sensors)
    out << s.id << ',' << format_double(s.pos.lat) << ',' << format_double(s.pos.lon) << '\n';
}

// ---- OSM -------------------------------------------------------------------

const std::set<std::string>& default_highway_filter() {
  static const std::set<std::string> filter{
      "motorway",     "motorway_link", "trunk",         "trunk_link",   "primary",
      "primary_link", "secondary",     "secondary_link", "tertiary",    "tertiary_link",
      "unclassified", "residential"};
  return filter;
}

RoadGraph parse_osm_xml(std::istream& osm_file, const std::set<std::string>& highway_filter) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(osm_file, tree);
  } catch (const pt::xml_parser_error& e) {
    throw InputError(std::string("osm xml syntax error: ") + e.what());
  }
  const auto osm = tree.get_child_optional("osm");
  if (!osm) throw InputError("osm xml: missing <osm> root element");

  struct OsmNode {
    LatLon pos;
    bool used = false;
    std::size_t order = 0;
  };
  std::unordered_map<std::string, OsmNode> osm_nodes;
  std::vector<std::string> node_order;

  struct Way {
    std::string id;
    std::vector<std::string> refs;
    std::string highway;
    bool oneway = false;
  };
  std::vector<Way> ways;

  for (const auto& [name, child] : *osm) {
    if (name == "node") {
      const auto id = child.get<std::string>("<xmlattr>.id", "");
      if (id.empty()) throw InputError("osm xml: node without id");
      OsmNode n;
      try {
        n.pos = LatLon{parse_double(child.get<std::string>("<xmlattr>.lat")),
                       parse_double(child.get<std::string>("<xmlattr>.lon"))};
      } catch (const pt::ptree_error&) {
        throw InputError("osm xml: node '" + id + "' lacks lat/lon");
      }
      n.order = node_order.size();
      if (osm_nodes.emplace(id, n).second) node_order.push_back(id);
    } else if (name == "way") {
      Way w;
      w.id = child.get<std::string>("<xmlattr>.id", "");
      for (const auto& [tag, sub] : child) {
        if (tag == "nd") {
          w.refs.push_back(sub.get<std::string>("<xmlattr>.ref", ""));
        } else if (tag == "tag") {
          const auto k = sub.get<std::string>("<xmlattr>.k", "");
          const auto v = sub.get<std::string>("<xmlattr>.v", "");
          if (k == "highway") w.highway = v;
          if (k == "oneway") w.oneway = (v == "yes" || v == "true" || v == "1");
        }
      }
      if (!w.highway.empty() && (highway_filter.empty() || highway_filter.count(w.highway)))
        ways.push_back(std::move(w));
    }
  }

  std::vector<EdgeRecord> edges;
  for (const auto& w : ways) {
    for (const auto& ref : w.refs) {
      const auto it = osm_nodes.find(ref);
      if (it == osm_nodes.end())
        throw InputError("osm xml: way '" + w.id + "' references undeclared node '" + ref + "'");
      it->second.used = true;
    }
    const bool freeway = w.highway == "motorway" || w.highway == "motorway_link";
    for (std::size_t k = 0; k + 1 < w.refs.size(); ++k) {
      const auto& a = w.refs[k];
      const auto& b = w.refs[k + 1];
      if (a == b) continue;
      // Distinct OSM nodes can share coordinates; keep the length positive.
      const double len =
          std::max(haversine_miles(osm_nodes[a].pos, osm_nodes[b].pos), 1e-9);
      const auto base = "w" + w.id + "." + std::to_string(k);
      edges.push_back(EdgeRecord{base + "f", a, b, len, freeway});
      if (!w.oneway) edges.push_back(EdgeRecord{base + "r", b, a, len, freeway});
    }
  }
  if (edges.empty()) throw InputError("osm xml: no roads left after highway filtering");

  std::vector<RoadNode> nodes;
  for (const auto& id : node_order) {
    const auto& n = osm_nodes[id];
    if (n.used) nodes.push_back(RoadNode{id, n.pos});
  }
  return RoadGraph::build(std::move(nodes), edges);
}

// ---- snapping --------------------------------------------------------------

std::vector<Sensor> snap_sensors(const RoadGraph& graph, std::vector<Sensor> sensors) {
  if (graph.empty()) throw InputError("cannot snap sensors onto an empty road graph");
  std::vector<LatLon> node_pos;
  std::vector<std::uint32_t> rank;
  node_pos.reserve(graph.node_count());
  rank.reserve(graph.node_count());
  for (std::size_t i = 0; i < graph.node_count(); ++i) {
    node_pos.push_back(graph.node(static_cast<NodeIndex>(i)).pos);
    rank.push_back(graph.id_rank(static_cast<NodeIndex>(i)));
  }
  std::vector<LatLon> queries;
  for (const auto& s : sensors) {
    if (!std::isfinite(s.pos.lat) || !std::isfinite(s.pos.lon))
      throw InputError("sensor '" + s.id + "' has non-finite coordinates");
    queries.push_back(s.pos);
  }
  const auto nearest = kernels::nearest_nodes(node_pos, rank, queries);
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    sensors[i].snapped_node = nearest[i].node;
    sensors[i].snap_distance_miles = nearest[i].distance;
  }
  return sensors;
}

// ---- Dijkstra --------------------------------------------------------------

std::vector<double> shortest_distances(const RoadGraph& graph, NodeIndex source,
                                       double freeway_coefficient, double max_distance) {
  std::vector<double> dist(graph.node_count(), kUnreachable);
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  dist[source] = 0.0;
  heap.emplace(0.0, source);
  while (!heap.empty()) {
    const auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    for (const auto e : graph.out_edges(u)) {
      const auto& edge = graph.edge(e);
      const double cost = edge.length_miles * (edge.is_freeway ? freeway_coefficient : 1.0);
      const double nd = d + cost;
      if (nd < dist[edge.to] && nd <= max_distance) {
        dist[edge.to] = nd;
        heap.emplace(nd, edge.to);
      }
    }
  }
  return dist;
}

std::optional<double> road_distance_miles(const RoadGraph& graph, std::string_view src_node,
                                          std::string_view dst_node) {
  const auto src = graph.index_of(src_node);
  const auto dst = graph.index_of(dst_node);
  if (src == dst) return 0.0;
  const auto dist = shortest_distances(graph, src);
  if (dist[dst] == kUnreachable) return std::nullopt;
  return dist[dst];
}

}  // namespace uagc
