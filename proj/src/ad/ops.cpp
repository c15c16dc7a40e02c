#include "uagc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "uagc/error.hpp"
#include "uagc/kernels.hpp"

namespace uagc::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
                   to_string(b));
}

void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

// Describes how a (smaller) operand b maps onto the output shape: the output
// is a sequence of contiguous blocks of `inner` elements, each paired with a
// contiguous block of b at a computed offset.
struct Broadcast {
  std::size_t inner = 1;
  std::vector<std::size_t> outer_dims;
  std::vector<std::size_t> outer_stride;  // stride into b, 0 where broadcast

  template <typename Fn>
  void for_each_block(Fn&& fn) const {
    std::size_t blocks = 1;
    for (auto d : outer_dims) blocks *= d;
    std::vector<std::size_t> idx(outer_dims.size(), 0);
    std::size_t b_off = 0;
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      fn(blk * inner, b_off);
      for (std::size_t ax = outer_dims.size(); ax-- > 0;) {
        ++idx[ax];
        b_off += outer_stride[ax];
        if (idx[ax] < outer_dims[ax]) break;
        b_off -= outer_stride[ax] * outer_dims[ax];
        idx[ax] = 0;
      }
    }
  }
};

std::optional<Broadcast> plan_broadcast(const Shape& out, const Shape& b) {
  if (b.size() > out.size()) return std::nullopt;
  const std::size_t r = out.size();
  Shape bp(r - b.size(), 1);
  bp.insert(bp.end(), b.begin(), b.end());
  for (std::size_t i = 0; i < r; ++i)
    if (bp[i] != out[i] && bp[i] != 1) return std::nullopt;

  Broadcast plan;
  std::size_t split = r;
  while (split > 0 && bp[split - 1] == out[split - 1]) {
    --split;
    plan.inner *= out[split];
  }
  std::vector<std::size_t> bstride(r, 1);
  for (std::size_t i = r; i-- > 1;) bstride[i - 1] = bstride[i] * bp[i];
  for (std::size_t i = 0; i < split; ++i) {
    plan.outer_dims.push_back(out[i]);
    plan.outer_stride.push_back(bp[i] == out[i] ? bstride[i] : 0);
  }
  return plan;
}

enum class BinOp { add, sub, mul };

Var binary(const Var& a_in, const Var& b_in, BinOp op, const char* name) {
  Var a = a_in, b = b_in;
  // a holds the output shape; for sub, `flip` records that the operands swapped.
  bool flip = false;
  auto plan = plan_broadcast(a.shape(), b.shape());
  if (!plan) {
    std::swap(a, b);
    flip = true;
    plan = plan_broadcast(a.shape(), b.shape());
    if (!plan) shape_fail(name, a_in.shape(), b_in.shape());
  }
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(av.shape());
  const std::size_t inner = plan->inner;
  plan->for_each_block([&](std::size_t o, std::size_t bo) {
    const double* x = av.data() + o;
    const double* y = bv.data() + bo;
    double* z = out.data() + o;
    if (op == BinOp::add)
      for (std::size_t i = 0; i < inner; ++i) z[i] = x[i] + y[i];
    else if (op == BinOp::sub && !flip)
      for (std::size_t i = 0; i < inner; ++i) z[i] = x[i] - y[i];
    else if (op == BinOp::sub)
      for (std::size_t i = 0; i < inner; ++i) z[i] = y[i] - x[i];
    else
      for (std::size_t i = 0; i < inner; ++i) z[i] = x[i] * y[i];
  });
  return a.tape().record(std::move(out), {a, b}, [a, b, p = *plan, op, flip](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    const std::size_t inner = p.inner;
    const bool ga_on = t.requires_grad(a);
    const bool gb_on = t.requires_grad(b);
    Tensor* ga = ga_on ? &t.grad(a) : nullptr;
    Tensor* gb = gb_on ? &t.grad(b) : nullptr;
    const Tensor& av = t.value(a);
    const Tensor& bv = t.value(b);
    p.for_each_block([&](std::size_t o, std::size_t bo) {
      const double* gg = g.data() + o;
      if (op != BinOp::mul) {
        const double sa = (op == BinOp::sub && flip) ? -1.0 : 1.0;
        const double sb = (op == BinOp::sub && !flip) ? -1.0 : 1.0;
        if (ga) {
          double* d = ga->data() + o;
          for (std::size_t i = 0; i < inner; ++i) d[i] += sa * gg[i];
        }
        if (gb) {
          double* d = gb->data() + bo;
          for (std::size_t i = 0; i < inner; ++i) d[i] += sb * gg[i];
        }
      } else {
        if (ga) {
          double* d = ga->data() + o;
          const double* y = bv.data() + bo;
          for (std::size_t i = 0; i < inner; ++i) d[i] += gg[i] * y[i];
        }
        if (gb) {
          double* d = gb->data() + bo;
          const double* x = av.data() + o;
          for (std::size_t i = 0; i < inner; ++i) d[i] += gg[i] * x[i];
        }
      }
    });
  });
}

template <typename Fwd, typename Deriv>
Var unary(const Var& x, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return x.tape().record(std::move(out), {x}, [x, deriv](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    const Tensor& xv = t.value(x);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], y[i]);
  });
}

std::size_t normalize_axis(std::size_t axis, std::size_t rank, const char* op) {
  if (axis >= rank) throw ShapeError(std::string(op) + ": axis out of range");
  return axis;
}

}  // namespace

// ---- linear algebra --------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.empty() || bs.size() != 2 || as.back() != bs[0]) shape_fail("matmul", as, bs);
  const std::size_t k = bs[0], n = bs[1], m = a.value().size() / k;
  Shape os = as;
  os.back() = n;
  Tensor out(os, 0.0);
  kernels::gemm_nn(a.value().data(), b.value().data(), out.data(), m, k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(a)) kernels::gemm_nt(g.data(), t.value(b).data(), t.grad(a).data(), m, n, k);
    if (t.requires_grad(b)) kernels::gemm_tn(t.value(a).data(), g.data(), t.grad(b).data(), m, k, n);
  });
}

Var affine(const std::vector<Var>& xs, const std::vector<Var>& ws, const Var& bias) {
  if (xs.empty() || xs.size() != ws.size()) throw ShapeError("affine: need one weight per input");
  const Shape& bs = bias.shape();
  if (bs.size() != 1) throw ShapeError("affine: bias must be 1-D, got " + to_string(bs));
  const std::size_t n = bs[0];
  Shape os = xs[0].shape();
  if (os.empty()) throw ShapeError("affine: scalar input");
  os.back() = n;
  const std::size_t m = numel(os) / n;
  std::vector<std::size_t> ks;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Shape& x = xs[i].shape();
    const Shape& w = ws[i].shape();
    if (w.size() != 2 || x.empty() || x.back() != w[0] || w[1] != n ||
        !std::equal(x.begin(), x.end() - 1, os.begin(), os.end() - 1))
      shape_fail("affine", x, w);
    ks.push_back(w[0]);
  }
  Tensor out(os);
  const double* bv = bias.value().data();
  for (std::size_t r = 0; r < m; ++r) std::copy_n(bv, n, out.data() + r * n);
  for (std::size_t i = 0; i < xs.size(); ++i)
    kernels::gemm_nn(xs[i].value().data(), ws[i].value().data(), out.data(), m, ks[i], n);
  std::vector<Var> inputs = xs;
  inputs.insert(inputs.end(), ws.begin(), ws.end());
  inputs.push_back(bias);
  return bias.tape().record(std::move(out), inputs, [xs, ws, bias, ks, m, n](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (t.requires_grad(xs[i]))
        kernels::gemm_nt(g.data(), t.value(ws[i]).data(), t.grad(xs[i]).data(), m, n, ks[i]);
      if (t.requires_grad(ws[i]))
        kernels::gemm_tn(t.value(xs[i]).data(), g.data(), t.grad(ws[i]).data(), m, ks[i], n);
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad(bias);
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[r * n + j];
    }
  });
}

Var sparse_matmul(const SparseOperatorPtr& s, const Var& x, std::size_t axis) {
  const Shape& xs = x.shape();
  normalize_axis(axis, xs.size(), "sparse_matmul");
  if (xs[axis] != s->matrix.cols())
    throw ShapeError("sparse_matmul: operator is " + std::to_string(s->matrix.rows()) + "x" +
                     std::to_string(s->matrix.cols()) + ", input " + to_string(xs) + " on axis " +
                     std::to_string(axis));
  std::size_t pre = 1, post = 1;
  for (std::size_t i = 0; i < axis; ++i) pre *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) post *= xs[i];
  Shape os = xs;
  os[axis] = s->matrix.rows();
  Tensor out(os, 0.0);
  kernels::spmm(s->matrix.view(), x.value().data(), out.data(), pre, post);
  return x.tape().record(std::move(out), {x}, [s, x, pre, post](Tape& t, const Var& self) {
    kernels::spmm(s->transpose.view(), t.grad(self).data(), t.grad(x).data(), pre, post);
  });
}

// ---- element-wise ----------------------------------------------------------

Var add(const Var& a, const Var& b) { return binary(a, b, BinOp::add, "add"); }

Var mul(const Var& a, const Var& b) { return binary(a, b, BinOp::mul, "mul"); }

Var sub(const Var& a, const Var& b) { return binary(a, b, BinOp::sub, "sub"); }

Var scale(const Var& a, double c) {
  return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var add_scalar(const Var& a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

// ---- normalisation ---------------------------------------------------------

Var softmax(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("softmax: scalar input");
  const std::size_t d = xv.shape().back();
  const std::size_t rows = xv.size() / d;
  Tensor out(xv.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double* o = out.data() + r * d;
    const double mx = *std::max_element(in, in + d);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (o[i] = std::exp(in[i] - mx));
    for (std::size_t i = 0; i < d; ++i) o[i] /= s;
  }
  return x.tape().record(std::move(out), {x}, [x, d, rows](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad(x);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gy = g.data() + r * d;
      const double* yy = y.data() + r * d;
      double dot = 0.0;
      for (std::size_t i = 0; i < d; ++i) dot += gy[i] * yy[i];
      double* gr = gx.data() + r * d;
      for (std::size_t i = 0; i < d; ++i) gr[i] += yy[i] * (gy[i] - dot);
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  const Tensor& xv = x.value();
  if (xv.rank() == 0) throw ShapeError("layer_norm: scalar input");
  const std::size_t d = xv.shape().back();
  if (gain.shape() != Shape{d} || bias.shape() != Shape{d})
    shape_fail("layer_norm", xv.shape(), gain.shape());
  const std::size_t rows = xv.size() / d;
  Tensor out(xv.shape());
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_sd = std::make_shared<std::vector<double>>(rows);
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += in[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (in[i] - mu) * (in[i] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_sd)[r] = is;
    for (std::size_t i = 0; i < d; ++i) {
      const double h = (in[i] - mu) * is;
      (*xhat)[r * d + i] = h;
      out[r * d + i] = h * gv[i] + bv[i];
    }
  }
  return x.tape().record(
      std::move(out), {x, gain, bias}, [x, gain, bias, d, rows, xhat, inv_sd](Tape& t, const Var& self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(gain);
        if (t.requires_grad(gain) || t.requires_grad(bias)) {
          Tensor* gg = t.requires_grad(gain) ? &t.grad(gain) : nullptr;
          Tensor* gb = t.requires_grad(bias) ? &t.grad(bias) : nullptr;
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < d; ++i) {
              if (gg) (*gg)[i] += g[r * d + i] * (*xhat)[r * d + i];
              if (gb) (*gb)[i] += g[r * d + i];
            }
        }
        if (!t.requires_grad(x)) return;
        Tensor& gx = t.grad(x);
        const double inv_d = 1.0 / static_cast<double>(d);
        for (std::size_t r = 0; r < rows; ++r) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gv[i];
            m1 += gh;
            m2 += gh * (*xhat)[r * d + i];
          }
          m1 *= inv_d;
          m2 *= inv_d;
          for (std::size_t i = 0; i < d; ++i) {
            const double gh = g[r * d + i] * gv[i];
            gx[r * d + i] += (*inv_sd)[r] * (gh - m1 - (*xhat)[r * d + i] * m2);
          }
        }
      });
}

// ---- structural ------------------------------------------------------------

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  normalize_axis(axis, s0.size(), "concat");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];
  std::vector<std::size_t> widths;  // contiguous run per part within one outer step
  std::size_t total_axis = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != s0.size()) shape_fail("concat", s0, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != s0[i]) shape_fail("concat", s0, s);
    total_axis += s[axis];
    widths.push_back(s[axis] * inner);
  }
  Shape os = s0;
  os[axis] = total_axis;
  Tensor out(os);
  const std::size_t row = total_axis * inner;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const double* src = parts[k].value().data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(src + o * widths[k], widths[k], out.data() + o * row + offset);
    offset += widths[k];
  }
  return parts[0].tape().record(std::move(out), parts, [parts, widths, outer, row](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (t.requires_grad(parts[k])) {
        Tensor& gp = t.grad(parts[k]);
        for (std::size_t o = 0; o < outer; ++o) {
          const double* src = g.data() + o * row + offset;
          double* dst = gp.data() + o * widths[k];
          for (std::size_t i = 0; i < widths[k]; ++i) dst[i] += src[i];
        }
      }
      offset += widths[k];
    }
  });
}

Var slice(const Var& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& xs = x.shape();
  normalize_axis(axis, xs.size(), "slice");
  if (start + length > xs[axis] || length == 0)
    throw ShapeError("slice: range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") outside axis of size " + std::to_string(xs[axis]));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= xs[i];
  for (std::size_t i = axis + 1; i < xs.size(); ++i) inner *= xs[i];
  Shape os = xs;
  os[axis] = length;
  Tensor out(os);
  const std::size_t src_row = xs[axis] * inner, dst_row = length * inner;
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(x.value().data() + o * src_row + start * inner, dst_row, out.data() + o * dst_row);
  return x.tape().record(std::move(out), {x}, [x, outer, inner, start, src_row, dst_row](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = g.data() + o * dst_row;
      double* dst = gx.data() + o * src_row + start * inner;
      for (std::size_t i = 0; i < dst_row; ++i) dst[i] += src[i];
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Var& self) {
    accumulate(t.grad(x), t.grad(self));
  });
}

Var permute(const Var& x, const std::vector<std::size_t>& perm) {
  const Shape& xs = x.shape();
  if (perm.size() != xs.size()) throw ShapeError("permute: " + std::to_string(perm.size()) +
                                                 " axes for shape " + to_string(xs));
  std::vector<bool> seen(xs.size(), false);
  for (auto a : perm) {
    if (a >= xs.size() || seen[a]) throw ShapeError("permute: invalid axis order");
    seen[a] = true;
  }
  const std::size_t r = xs.size();
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * xs[i];
  Shape os(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    os[i] = xs[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  const std::size_t n = x.value().size();
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (*src)[i] = off;
    for (std::size_t ax = r; ax-- > 0;) {
      ++idx[ax];
      off += stride[ax];
      if (idx[ax] < os[ax]) break;
      off -= stride[ax] * os[ax];
      idx[ax] = 0;
    }
  }
  Tensor out(os);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[(*src)[i]];
  return x.tape().record(std::move(out), {x}, [x, src](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[(*src)[i]] += g[i];
  });
}

Var embedding_lookup(const Var& table, const std::vector<std::size_t>& indices) {
  const Shape& ts = table.shape();
  if (ts.size() != 2) throw ShapeError("embedding_lookup: table must be 2-D, got " + to_string(ts));
  const std::size_t d = ts[1];
  Tensor out(Shape{indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= ts[0]) throw ShapeError("embedding_lookup: index out of range");
    std::copy_n(table.value().data() + indices[r] * d, d, out.data() + r * d);
  }
  return table.tape().record(std::move(out), {table}, [table, indices, d](Tape& t, const Var& self) {
    const Tensor& g = t.grad(self);
    Tensor& gt = t.grad(table);
    for (std::size_t r = 0; r < indices.size(); ++r)
      for (std::size_t i = 0; i < d; ++i) gt[indices[r] * d + i] += g[r * d + i];
  });
}

// ---- attention -------------------------------------------------------------

Var scaled_dot_attention(const Var& q, const Var& k, const Var& v, std::size_t n_heads, bool causal) {
  const Shape& qs = q.shape();
  const Shape& ks = k.shape();
  if (qs.size() < 2 || ks != v.shape() || ks.size() != qs.size()) shape_fail("attention", qs, ks);
  const std::size_t r = qs.size();
  for (std::size_t i = 0; i + 2 < r; ++i)
    if (qs[i] != ks[i]) shape_fail("attention", qs, ks);
  const std::size_t tq = qs[r - 2], tk = ks[r - 2], d = qs[r - 1];
  if (ks[r - 1] != d || n_heads == 0 || d % n_heads != 0) shape_fail("attention", qs, ks);
  if (causal && tq != tk) throw ShapeError("attention: causal mask needs equal query/key lengths");
  const std::size_t dk = d / n_heads;
  const std::size_t lead = q.value().size() / (tq * d);
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));

  auto probs = std::make_shared<std::vector<double>>(lead * n_heads * tq * tk, 0.0);
  Tensor out(qs, 0.0);
  const double* Q = q.value().data();
  const double* K = k.value().data();
  const double* V = v.value().data();
  std::vector<double> row(tk);
  for (std::size_t l = 0; l < lead; ++l) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      double* P = probs->data() + ((l * n_heads + h) * tq) * tk;
      for (std::size_t i = 0; i < tq; ++i) {
        const std::size_t limit = causal ? i + 1 : tk;
        const double* qi = Q + (l * tq + i) * d + h * dk;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < limit; ++j) {
          const double* kj = K + (l * tk + j) * d + h * dk;
          double s = 0.0;
          for (std::size_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
          row[j] = s * sc;
          mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < limit; ++j) z += (row[j] = std::exp(row[j] - mx));
        double* oi = out.data() + (l * tq + i) * d + h * dk;
        for (std::size_t j = 0; j < limit; ++j) {
          const double p = row[j] / z;
          P[i * tk + j] = p;
          const double* vj = V + (l * tk + j) * d + h * dk;
          for (std::size_t c = 0; c < dk; ++c) oi[c] += p * vj[c];
        }
      }
    }
  }

  return q.tape().record(
      std::move(out), {q, k, v},
      [q, k, v, probs, lead, n_heads, tq, tk, d, dk, sc](Tape& t, const Var& self) {
        const Tensor& g = t.grad(self);
        const double* Q = t.value(q).data();
        const double* K = t.value(k).data();
        const double* V = t.value(v).data();
        double* gq = t.requires_grad(q) ? t.grad(q).data() : nullptr;
        double* gk = t.requires_grad(k) ? t.grad(k).data() : nullptr;
        double* gv = t.requires_grad(v) ? t.grad(v).data() : nullptr;
        std::vector<double> dp(tk);
        for (std::size_t l = 0; l < lead; ++l) {
          for (std::size_t h = 0; h < n_heads; ++h) {
            const double* P = probs->data() + ((l * n_heads + h) * tq) * tk;
            for (std::size_t i = 0; i < tq; ++i) {
              const double* gi = g.data() + (l * tq + i) * d + h * dk;
              double dot = 0.0;
              for (std::size_t j = 0; j < tk; ++j) {
                const double p = P[i * tk + j];
                const double* vj = V + (l * tk + j) * d + h * dk;
                double s = 0.0;
                for (std::size_t c = 0; c < dk; ++c) s += gi[c] * vj[c];
                dp[j] = s;
                dot += p * s;
                if (gv && p != 0.0) {
                  double* gvj = gv + (l * tk + j) * d + h * dk;
                  for (std::size_t c = 0; c < dk; ++c) gvj[c] += p * gi[c];
                }
              }
              const double* qi = Q + (l * tq + i) * d + h * dk;
              for (std::size_t j = 0; j < tk; ++j) {
                const double p = P[i * tk + j];
                if (p == 0.0) continue;
                const double ds = p * (dp[j] - dot) * sc;
                const double* kj = K + (l * tk + j) * d + h * dk;
                if (gq) {
                  double* gqi = gq + (l * tq + i) * d + h * dk;
                  for (std::size_t c = 0; c < dk; ++c) gqi[c] += ds * kj[c];
                }
                if (gk) {
                  double* gkj = gk + (l * tk + j) * d + h * dk;
                  for (std::size_t c = 0; c < dk; ++c) gkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

// ---- reductions and losses -------------------------------------------------

Var sum(const Var& x) {
  double s = 0.0;
  for (const double v : x.value().values()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& t, const Var& self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(x).values()) v += g;
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var masked_mae(const Var& pred, const Tensor& target, const Tensor& mask) {
  const Tensor& pv = pred.value();
  if (pv.shape() != target.shape() || pv.shape() != mask.shape())
    shape_fail("masked_mae", pv.shape(), target.shape());
  double total = 0.0, count = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (mask[i] == 0.0) continue;
    total += mask[i] * std::abs(pv[i] - target[i]);
    count += mask[i];
  }
  const double inv = count > 0.0 ? 1.0 / count : 0.0;
  return pred.tape().record(Tensor::scalar(total * inv), {pred},
                            [pred, target, mask, inv](Tape& t, const Var& self) {
                              const double g = t.grad(self)[0] * inv;
                              const Tensor& pv = t.value(pred);
                              Tensor& gp = t.grad(pred);
                              for (std::size_t i = 0; i < pv.size(); ++i) {
                                if (mask[i] == 0.0) continue;
                                const double diff = pv[i] - target[i];
                                const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                                gp[i] += g * mask[i] * sgn;
                              }
                            });
}

}  // namespace uagc::ad
