#include "uagc/tape.hpp"

#include "uagc/error.hpp"

namespace uagc::ad {

Var Tape::push(Entry e) {
  entries_.push_back(std::move(e));
  return Var(this, static_cast<std::uint32_t>(entries_.size() - 1));
}

Var Tape::constant(Tensor value) {
  Entry e;
  e.value = std::move(value);
  return push(std::move(e));
}

Var Tape::parameter(Parameter& p) {
  if (const auto it = param_vars_.find(&p); it != param_vars_.end()) return Var(this, it->second);
  Entry e;
  e.value = p.value;
  e.requires_grad = p.trainable;
  e.param = &p;
  const Var v = push(std::move(e));
  param_vars_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  Entry e;
  e.value = std::move(value);
  for (const auto& in : inputs) e.requires_grad = e.requires_grad || requires_grad(in);
  if (e.requires_grad) e.backward = std::move(backward);
  return push(std::move(e));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  Entry e;
  e.value = std::move(value);
  for (const auto& in : inputs) e.requires_grad = e.requires_grad || requires_grad(in);
  if (e.requires_grad) e.backward = std::move(backward);
  return push(std::move(e));
}

Tensor& Tape::grad(const Var& v) {
  auto& e = entries_[v.id()];
  if (e.grad.shape() != e.value.shape() || e.grad.size() != e.value.size())
    e.grad = Tensor(e.value.shape(), 0.0);
  return e.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.value().size() != 1)
    throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  if (!requires_grad(loss)) return;
  grad(loss)[0] += 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& e = entries_[i];
    if (!e.requires_grad || e.grad.size() != e.value.size()) continue;
    if (e.backward) e.backward(*this, Var(this, static_cast<std::uint32_t>(i)));
  }
  for (auto& e : entries_) {
    if (!e.param || !e.requires_grad || e.grad.size() != e.value.size()) continue;
    auto& pg = e.param->grad;
    for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += e.grad[k];
  }
}

}  // namespace uagc::ad
