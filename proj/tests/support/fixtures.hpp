#pragma once

#include <functional>
#include <string>
#include <vector>

#include "uagc/graphbuild.hpp"
#include "uagc/models.hpp"
#include "uagc/pathgen.hpp"
#include "uagc/training.hpp"

namespace uagc::fixtures {

/// Random directed road graph inside a ~20-mile box. Edge lengths are the
/// straight-line distance times U(0.6, 1.6), so some are shorter than the
/// crow flies; roughly a third are freeways.
RoadGraph random_road_graph(std::size_t n_nodes, std::size_t n_edges, std::uint64_t seed);

/// Ring fixture run through the whole graph pipeline.
struct RingPipeline {
  training::SyntheticConfig config;
  training::SyntheticBundle bundle;
  std::vector<Sensor> sensors;  // snapped
  Grid grid;
  PathSet paths;
  SensorAdjacency adjacency;
  ActivityTable activity;  // smoothed and normalised
};

RingPipeline build_ring(const training::SyntheticConfig& config);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "<param>[<index>]"
  std::size_t checked = 0;
  std::size_t kinks = 0;  // elements re-probed with a smaller step
};

/// Central finite differences against the tape gradient for every trainable
/// parameter. At most `per_param` elements of each tensor are probed (chosen
/// with a fixed seed). The error of one element is
/// |analytic - numeric| / max(|analytic| + |numeric|, floor). When the two
/// one-sided differences disagree (a kink within h) the step shrinks tenfold,
/// at most three times.
GradCheckResult check_gradients(ad::ParameterSet& params, const std::function<ad::Var(ad::Tape&)>& loss,
                                double h = 1e-5, std::size_t per_param = 0, double floor = 1e-4);

/// Fills every trainable parameter with U(-scale, scale).
void randomize(ad::ParameterSet& params, std::uint64_t seed, double scale = 0.5);

/// Random tensor with entries U(lo, hi).
ad::Tensor random_tensor(ad::Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0);

}  // namespace uagc::fixtures
