#include "uagc/tensor.hpp"

#include <algorithm>

#include "uagc/error.hpp"

namespace uagc::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != numel(shape_))
    throw ShapeError("tensor: " + std::to_string(data_.size()) + " values for shape " +
                     to_string(shape_));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (numel(shape) != size())
    throw ShapeError("reshape: " + to_string(shape_) + " -> " + to_string(shape));
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Parameter& ParameterSet::add(std::string name, Tensor value, bool trainable) {
  if (index_.count(name)) throw UsageError("duplicate parameter name '" + name + "'");
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->grad = Tensor(value.shape(), 0.0);
  p->value = std::move(value);
  p->trainable = trainable;
  index_.emplace(std::move(name), params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

bool ParameterSet::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

Parameter& ParameterSet::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return *params_[it->second];
}

const Parameter& ParameterSet::at(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw UsageError("unknown parameter '" + std::string(name) + "'");
  return *params_[it->second];
}

std::size_t ParameterSet::scalar_count(bool trainable_only) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p->trainable) n += p->value.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.fill(0.0);
}

}  // namespace uagc::ad
