#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "uagc/rng.hpp"

namespace uagc::fixtures {

RoadGraph random_road_graph(std::size_t n_nodes, std::size_t n_edges, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RoadNode> nodes;
  char buf[32];
  for (std::size_t i = 0; i < n_nodes; ++i) {
    std::snprintf(buf, sizeof buf, "n%zu", i);
    nodes.push_back({buf, {34.0 + 0.3 * rng.uniform(), -118.4 + 0.3 * rng.uniform()}});
  }
  std::vector<EdgeRecord> edges;
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto a = rng.below(n_nodes), b = rng.below(n_nodes);
    if (a == b) continue;
    const double straight = haversine_miles(nodes[a].pos, nodes[b].pos);
    std::snprintf(buf, sizeof buf, "e%zu", e);
    edges.push_back({buf, nodes[a].id, nodes[b].id, std::max(0.01, straight * rng.uniform(0.6, 1.6)),
                     rng.uniform() < 0.33});
  }
  return RoadGraph::build(std::move(nodes), edges);
}

RingPipeline build_ring(const training::SyntheticConfig& config) {
  RingPipeline r;
  r.config = config;
  r.bundle = training::make_synthetic_dataset(config);
  r.sensors = snap_sensors(r.bundle.graph, r.bundle.sensors);
  r.grid = make_grid(r.sensors, 2.0, 2.0);
  PathGenConfig pc;
  pc.seed = config.seed;
  r.paths = generate_path_set(r.bundle.graph, r.grid, r.sensors, pc);
  r.adjacency = combine_adjacency(distance_adjacency(r.bundle.graph, r.sensors), cooccurrence_matrix(r.paths));
  r.activity = normalize_activity(smooth_histogram(build_histogram(r.bundle.survey)));
  return r;
}

GradCheckResult check_gradients(ad::ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss,
                                double h, std::size_t per_param, double floor) {
  params.zero_grad();
  {
    ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto eval = [&] {
    ad::Tape tape;
    return loss(tape).value()[0];
  };
  GradCheckResult out;
  Rng rng(12345);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& param = params[p];
    if (!param.trainable) continue;
    std::vector<std::size_t> idx(param.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (per_param && idx.size() > per_param) {
      shuffle(idx, rng);
      idx.resize(per_param);
    }
    for (const auto i : idx) {
      const double saved = param.value[i];
      const double analytic = param.grad.empty() ? 0.0 : param.grad[i];
      auto central = [&](double step, double& up, double& down) {
        param.value[i] = saved + step;
        up = eval();
        param.value[i] = saved - step;
        down = eval();
        param.value[i] = saved;
        return (up - down) / (2.0 * step);
      };
      auto rel = [&](double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), floor); };
      double up = 0, down = 0, step = h;
      double numeric = central(step, up, down);
      double err = rel(analytic, numeric);
      // A ReLU kink inside [x-h, x+h] makes the two one-sided slopes disagree
      // far beyond curvature effects; shrink the step until it is clear.
      for (int retry = 0; retry < 3 && err > 1e-6; ++retry) {
        const double mid = eval();
        if (rel((up - mid) / step, (mid - down) / step) < 1e-2) break;
        if (retry == 0) ++out.kinks;
        step /= 10.0;
        numeric = central(step, up, down);
        err = rel(analytic, numeric);
      }
      ++out.checked;
      if (err > out.max_rel_error) {
        out.max_rel_error = err;
        out.worst = param.name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

void randomize(ad::ParameterSet& params, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (std::size_t p = 0; p < params.size(); ++p)
    if (params[p].trainable)
      for (auto& v : params[p].value.values()) v = rng.uniform(-scale, scale);
}

ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  ad::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace uagc::fixtures
