#pragma once

#include <memory>
#include <vector>

#include "uagc/sparse.hpp"
#include "uagc/tape.hpp"

namespace uagc::ad {

/// Constant sparse left operand with its transpose cached for backward.
struct SparseOperator {
  explicit SparseOperator(SparseMatrix m) : matrix(std::move(m)), transpose(matrix.transposed()) {}
  SparseMatrix matrix;
  SparseMatrix transpose;
};
using SparseOperatorPtr = std::shared_ptr<const SparseOperator>;

inline SparseOperatorPtr make_sparse_operator(SparseMatrix m) {
  return std::make_shared<const SparseOperator>(std::move(m));
}

/// (..., K) x (K, M) -> (..., M)
Var matmul(const Var& a, const Var& b);

/// sum_i xs[i] W_i + bias in a single output; xs[i]: (..., K_i), W_i: (K_i, M), bias: (M).
Var affine(const std::vector<Var>& xs, const std::vector<Var>& ws, const Var& bias);

/// Applies S along `axis` of x: x viewed as (pre, N, post), out[p] = S * x[p].
Var sparse_matmul(const SparseOperatorPtr& s, const Var& x, std::size_t axis);

// Element-wise with numpy-style broadcasting of the smaller operand (dims of
// size 1 or missing leading dims).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);

/// Softmax over the last axis.
Var softmax(const Var& x);

/// Normalises the last axis (population variance + eps), then applies gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length);
Var reshape(const Var& x, Shape shape);
/// Reorders axes: output axis i is input axis perm[i].
Var permute(const Var& x, const std::vector<std::size_t>& perm);

/// Rows of `table` (V, D) selected by `indices` -> (len, D).
Var embedding_lookup(const Var& table, const std::vector<std::size_t>& indices);

/// Multi-head softmax(Q K^T / sqrt(d_k)) V over the second-to-last axis.
/// q: (..., Tq, D); k, v: (..., Tk, D); D split into n_heads of d_k = D / n_heads.
/// `causal` masks keys after the query position (requires Tq == Tk).
Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, std::size_t n_heads,
                         bool causal);

Var sum(const Var& x);
Var mean(const Var& x);

/// sum(mask * |pred - target|) / sum(mask); 0 when the mask is empty.
Var masked_mae(const Var& pred, const Tensor& target, const Tensor& mask);

}  // namespace uagc::ad
