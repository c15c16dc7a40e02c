#include "uagc/optim.hpp"

#include <cmath>

#include "uagc/error.hpp"

namespace uagc::ad {

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(&params), config_(config) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value.shape(), 0.0);
    v_.emplace_back(params[i].value.shape(), 0.0);
  }
}

void Adam::step() {
  if (params_->size() != m_.size()) throw UsageError("adam: parameter set changed after construction");
  for (std::size_t i = 0; i < params_->size(); ++i) {
    const Parameter& p = (*params_)[i];
    if (!p.trainable) continue;
    for (const double g : p.grad.values())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter '" + p.name + "'");
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Parameter& p = (*params_)[i];
    if (!p.trainable) continue;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p.value[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace uagc::ad
