#pragma once

#include <cstdint>
#include <vector>

#include "uagc/tensor.hpp"

namespace uagc::ad {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moment buffers are bound to the parameter set
/// by position; the set must not grow after construction.
class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Throws NumericError
  /// naming the first parameter holding a non-finite gradient (nothing is updated).
  void step();

  double lr() const { return config_.lr; }
  void set_lr(double lr) { config_.lr = lr; }
  std::uint64_t step_count() const { return t_; }

  const Tensor& first_moment(std::size_t i) const { return m_[i]; }
  const Tensor& second_moment(std::size_t i) const { return v_[i]; }

 private:
  ParameterSet* params_;
  AdamConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::uint64_t t_ = 0;
};

}  // namespace uagc::ad
