#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "uagc/tensor.hpp"

namespace uagc::ad {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return shape()[axis]; }
  std::size_t rank() const { return shape().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

/// Define-by-run record of executed operations. Backward replays the record
/// in reverse, visiting each operation once, and accumulates (+=) into the
/// gradient buffers of trainable parameters.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Var& self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to `p`; repeated calls within one tape return the same Var.
  Var parameter(Parameter& p);
  /// Result of an operation. Records `backward` only when some input needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const { return entries_[v.id()].value; }
  bool requires_grad(const Var& v) const { return entries_[v.id()].requires_grad; }
  /// Gradient buffer of `v`, zero-initialised on first access.
  Tensor& grad(const Var& v);

  void backward(const Var& loss);

  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };
  Var push(Entry e);

  std::deque<Entry> entries_;
  std::unordered_map<Parameter*, std::uint32_t> param_vars_;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

}  // namespace uagc::ad
