#include "tcat/diff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tcat/errors.hpp"

namespace tcat::diff {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

bool tracking(std::initializer_list<const Tensor*> inputs) {
  if (!active_tape()) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  return node;
}

// Wraps `out` into a Tensor and, when tracking, records it on the tape.
template <class Backward>
Tensor finish(const char* op, std::initializer_list<const Tensor*> inputs,
              std::shared_ptr<Node> out, Backward&& bw) {
  if (tracking(inputs)) {
    out->requires_grad = true;
    std::vector<std::shared_ptr<Node>> in;
    in.reserve(inputs.size());
    for (const Tensor* t : inputs) in.push_back(t->shared());
    active_tape()->record(op, std::move(in), out, std::forward<Backward>(bw));
  }
  return Tensor(std::move(out));
}

struct AxisSplit {
  std::size_t outer = 1, mid = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for shape " + shape_str(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.mid = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

// Broadcast stride for the right operand of a binary op.
std::size_t broadcast_period(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return a.size();
  if (b.size() == 1) return 1;
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() <= sa.size() &&
      std::equal(sb.begin(), sb.end(), sa.end() - static_cast<std::ptrdiff_t>(sb.size()))) {
    return b.size();
  }
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) +
                       " onto " + shape_str(sa));
}

enum class BinOp { add, sub, mul };

Tensor binary(const char* name, BinOp op, const Tensor& a, const Tensor& b) {
  const std::size_t period = broadcast_period(a, b, name);
  const std::size_t n = a.size();
  std::vector<double> v(n);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    const double y = pb[period == n ? i : i % period];
    switch (op) {
      case BinOp::add: v[i] = pa[i] + y; break;
      case BinOp::sub: v[i] = pa[i] - y; break;
      case BinOp::mul: v[i] = pa[i] * y; break;
    }
  }
  auto out = make_node(a.shape(), std::move(v));
  Node* na = a.node();
  Node* nb = b.node();
  Node* no = out.get();
  return finish(name, {&a, &b}, out, [=] {
    const auto& g = no->grad;
    if (na->requires_grad) {
      auto& ga = na->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = period == n ? i : i % period;
        ga[i] += op == BinOp::mul ? g[i] * nb->value[j] : g[i];
      }
    }
    if (nb->requires_grad) {
      auto& gb = nb->grad_buffer();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = period == n ? i : i % period;
        switch (op) {
          case BinOp::add: gb[j] += g[i]; break;
          case BinOp::sub: gb[j] -= g[i]; break;
          case BinOp::mul: gb[j] += g[i] * na->value[i]; break;
        }
      }
    }
  });
}

// Elementwise unary op; `deriv(x, y)` returns dy/dx at input x with output y.
template <class F, class D>
Tensor unary(const char* name, const Tensor& x, F f, D deriv) {
  const std::size_t n = x.size();
  std::vector<double> v(n);
  const double* px = x.data().data();
  for (std::size_t i = 0; i < n; ++i) v[i] = f(px[i]);
  auto out = make_node(x.shape(), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish(name, {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    for (std::size_t i = 0; i < n; ++i) {
      gx[i] += no->grad[i] * deriv(nx->value[i], no->value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinOp::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinOp::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinOp::mul, a, b); }

Tensor scale(const Tensor& x, double s) {
  return unary("scale", x, [s](double v) { return v * s; },
               [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& x, double s) {
  return unary("add_scalar", x, [s](double v) { return v + s; },
               [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& x) { return scale(x, -1.0); }

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      "sigmoid", x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary("log", x, [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}

Tensor square(const Tensor& x) {
  return unary("square", x, [](double v) { return v * v; },
               [](double v, double) { return 2.0 * v; });
}

Tensor smooth_l1(const Tensor& x, double beta) {
  if (!(beta > 0.0)) throw ValidationError("smooth_l1: beta must be positive");
  return unary(
      "smooth_l1", x,
      [beta](double d) {
        const double a = std::abs(d);
        return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
      },
      [beta](double d, double) {
        if (std::abs(d) < beta) return d / beta;
        return d > 0.0 ? 1.0 : -1.0;
      });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto out = make_node({}, {s});
  Node* nx = x.node();
  Node* no = out.get();
  return finish("sum", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    const double g = no->grad[0];
    for (double& v : gx) v += g;
  });
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) throw SizeError("mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "sum_axis");
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> v(s.outer * s.inner, 0.0);
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t m = 0; m < s.mid; ++m)
      for (std::size_t i = 0; i < s.inner; ++i)
        v[o * s.inner + i] += px[(o * s.mid + m) * s.inner + i];
  auto out = make_node(std::move(shape), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("sum_axis", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t m = 0; m < s.mid; ++m)
        for (std::size_t i = 0; i < s.inner; ++i)
          gx[(o * s.mid + m) * s.inner + i] += no->grad[o * s.inner + i];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const std::size_t n = x.dim(axis);
  if (n == 0) throw SizeError("mean_axis over an empty axis");
  return scale(sum_axis(x, axis), 1.0 / static_cast<double>(n));
}

Tensor max_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "max_axis");
  if (s.mid == 0) throw SizeError("max_axis over an empty axis");
  Shape shape = x.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> v(s.outer * s.inner);
  std::vector<std::size_t> arg(s.outer * s.inner, 0);
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      double bv = px[o * s.mid * s.inner + i];
      for (std::size_t m = 1; m < s.mid; ++m) {
        const double c = px[(o * s.mid + m) * s.inner + i];
        if (c > bv) {
          bv = c;
          best = m;
        }
      }
      v[o * s.inner + i] = bv;
      arg[o * s.inner + i] = best;
    }
  auto out = make_node(std::move(shape), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("max_axis", {&x}, out, [=, arg = std::move(arg)] {
    auto& gx = nx->grad_buffer();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t k = o * s.inner + i;
        gx[(o * s.mid + arg[k]) * s.inner + i] += no->grad[k];
      }
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  std::vector<double> v(x.size());
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.mid * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < s.mid; ++m) mx = std::max(mx, px[base + m * s.inner]);
      double z = 0.0;
      for (std::size_t m = 0; m < s.mid; ++m) {
        const double e = std::exp(px[base + m * s.inner] - mx);
        v[base + m * s.inner] = e;
        z += e;
      }
      for (std::size_t m = 0; m < s.mid; ++m) v[base + m * s.inner] /= z;
    }
  auto out = make_node(x.shape(), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("softmax", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    const auto& y = no->value;
    const auto& g = no->grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.mid * s.inner + i;
        double dot = 0.0;
        for (std::size_t m = 0; m < s.mid; ++m) dot += g[base + m * s.inner] * y[base + m * s.inner];
        for (std::size_t m = 0; m < s.mid; ++m) {
          const std::size_t k = base + m * s.inner;
          gx[k] += y[k] * (g[k] - dot);
        }
      }
  });
}

Tensor log_softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "log_softmax");
  std::vector<double> v(x.size());
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.mid * s.inner + i;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < s.mid; ++m) mx = std::max(mx, px[base + m * s.inner]);
      double z = 0.0;
      for (std::size_t m = 0; m < s.mid; ++m) z += std::exp(px[base + m * s.inner] - mx);
      const double lse = mx + std::log(z);
      for (std::size_t m = 0; m < s.mid; ++m) v[base + m * s.inner] = px[base + m * s.inner] - lse;
    }
  auto out = make_node(x.shape(), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("log_softmax", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    const auto& y = no->value;
    const auto& g = no->grad;
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.mid * s.inner + i;
        double gs = 0.0;
        for (std::size_t m = 0; m < s.mid; ++m) gs += g[base + m * s.inner];
        for (std::size_t m = 0; m < s.mid; ++m) {
          const std::size_t k = base + m * s.inner;
          gx[k] += g[k] - std::exp(y[k]) * gs;
        }
      }
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  std::vector<double> v(m * n);
  Map(v.data(), mi, ni).noalias() =
      MapC(a.data().data(), mi, ki) * MapC(b.data().data(), ki, ni);
  auto out = make_node({m, n}, std::move(v));
  Node* na = a.node();
  Node* nb = b.node();
  Node* no = out.get();
  return finish("matmul", {&a, &b}, out, [=] {
    MapC g(no->grad.data(), mi, ni);
    if (na->requires_grad) {
      Map(na->grad_buffer().data(), mi, ki).noalias() +=
          g * MapC(nb->value.data(), ki, ni).transpose();
    }
    if (nb->requires_grad) {
      Map(nb->grad_buffer().data(), ki, ni).noalias() +=
          MapC(na->value.data(), mi, ki).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("transpose needs a matrix, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> v(x.size());
  const double* px = x.data().data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) v[j * r + i] = px[i * c + j];
  auto out = make_node({c, r}, std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("transpose", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += no->grad[j * r + i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " cannot become " +
                         shape_str(shape));
  }
  auto out = make_node(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("reshape", {&x}, out, [=] {
    auto& gx = nx->grad_buffer();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += no->grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw SizeError("concat of zero tensors");
  const Shape& first = xs[0].shape();
  const AxisSplit s0 = split_axis(first, axis, "concat");
  std::vector<std::size_t> mids;
  std::size_t total_mid = 0;
  for (const Tensor& t : xs) {
    const Shape& sh = t.shape();
    bool ok = sh.size() == first.size();
    for (std::size_t d = 0; ok && d < sh.size(); ++d) {
      if (d != axis && sh[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw DimensionError("concat: shape " + shape_str(sh) + " incompatible with " +
                           shape_str(first) + " along axis " + std::to_string(axis));
    }
    mids.push_back(sh[axis]);
    total_mid += sh[axis];
  }
  Shape shape = first;
  shape[axis] = total_mid;
  std::vector<double> v(shape_size(shape));
  std::size_t offset = 0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    const double* px = xs[t].data().data();
    const std::size_t block = mids[t] * s0.inner;
    for (std::size_t o = 0; o < s0.outer; ++o) {
      std::copy_n(px + o * block, block, v.data() + o * total_mid * s0.inner + offset);
    }
    offset += block;
  }
  auto out = make_node(std::move(shape), std::move(v));
  Node* no = out.get();
  const bool track = active_tape() &&
                     std::any_of(xs.begin(), xs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!track) return Tensor(std::move(out));
  out->requires_grad = true;
  std::vector<std::shared_ptr<Node>> in;
  std::vector<Node*> raw;
  for (const Tensor& t : xs) {
    in.push_back(t.shared());
    raw.push_back(t.node());
  }
  const std::size_t outer = s0.outer, inner = s0.inner;
  active_tape()->record("concat", std::move(in), out, [=] {
    std::size_t off = 0;
    for (std::size_t t = 0; t < raw.size(); ++t) {
      const std::size_t block = mids[t] * inner;
      if (raw[t]->requires_grad) {
        auto& g = raw[t]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < block; ++i)
            g[o * block + i] += no->grad[o * total_mid * inner + off + i];
      }
      off += block;
    }
  });
  return Tensor(std::move(out));
}

Tensor gather(const Tensor& x, std::size_t axis, std::span<const std::size_t> index) {
  const AxisSplit s = split_axis(x.shape(), axis, "gather");
  for (std::size_t j : index) {
    if (j >= s.mid) {
      throw IndexError("gather: index " + std::to_string(j) + " out of range for extent " +
                       std::to_string(s.mid));
    }
  }
  const std::size_t q = index.size();
  Shape shape = x.shape();
  shape[axis] = q;
  std::vector<double> v(s.outer * q * s.inner);
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < q; ++j)
      std::copy_n(px + (o * s.mid + index[j]) * s.inner, s.inner,
                  v.data() + (o * q + j) * s.inner);
  auto out = make_node(std::move(shape), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("gather", {&x}, out,
                [=, idx = std::vector<std::size_t>(index.begin(), index.end())] {
                  auto& gx = nx->grad_buffer();
                  for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t j = 0; j < q; ++j) {
                      double* dst = gx.data() + (o * s.mid + idx[j]) * s.inner;
                      const double* src = no->grad.data() + (o * q + j) * s.inner;
                      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                    }
                });
}

Tensor scatter_add(const Tensor& x, std::size_t axis, std::span<const std::size_t> index,
                   std::size_t extent) {
  const AxisSplit s = split_axis(x.shape(), axis, "scatter_add");
  if (index.size() != s.mid) {
    throw DimensionError("scatter_add: " + std::to_string(index.size()) +
                         " indices for extent " + std::to_string(s.mid));
  }
  for (std::size_t j : index) {
    if (j >= extent) {
      throw IndexError("scatter_add: index " + std::to_string(j) +
                       " out of range for output extent " + std::to_string(extent));
    }
  }
  Shape shape = x.shape();
  shape[axis] = extent;
  std::vector<double> v(s.outer * extent * s.inner, 0.0);
  const double* px = x.data().data();
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t j = 0; j < s.mid; ++j) {
      double* dst = v.data() + (o * extent + index[j]) * s.inner;
      const double* src = px + (o * s.mid + j) * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  auto out = make_node(std::move(shape), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("scatter_add", {&x}, out,
                [=, idx = std::vector<std::size_t>(index.begin(), index.end())] {
                  auto& gx = nx->grad_buffer();
                  for (std::size_t o = 0; o < s.outer; ++o)
                    for (std::size_t j = 0; j < s.mid; ++j) {
                      double* dst = gx.data() + (o * s.mid + j) * s.inner;
                      const double* src = no->grad.data() + (o * extent + idx[j]) * s.inner;
                      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
                    }
                });
}

Tensor mul_rows(const Tensor& x, const Tensor& w) {
  if (x.rank() == 0 || w.rank() != 1 || w.dim(0) != x.dim(0)) {
    throw DimensionError("mul_rows: weights " + shape_str(w.shape()) +
                         " do not match rows of " + shape_str(x.shape()));
  }
  const std::size_t rows = x.dim(0);
  const std::size_t inner = rows ? x.size() / rows : 0;
  std::vector<double> v(x.size());
  const double* px = x.data().data();
  const double* pw = w.data().data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < inner; ++i) v[r * inner + i] = px[r * inner + i] * pw[r];
  auto out = make_node(x.shape(), std::move(v));
  Node* nx = x.node();
  Node* nw = w.node();
  Node* no = out.get();
  return finish("mul_rows", {&x, &w}, out, [=] {
    const auto& g = no->grad;
    if (nx->requires_grad) {
      auto& gx = nx->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < inner; ++i) gx[r * inner + i] += g[r * inner + i] * nw->value[r];
    }
    if (nw->requires_grad) {
      auto& gw = nw->grad_buffer();
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) acc += g[r * inner + i] * nx->value[r * inner + i];
        gw[r] += acc;
      }
    }
  });
}

Tensor segment_softmax(const Tensor& x, std::span<const std::size_t> offsets) {
  if (x.rank() == 0) throw DimensionError("segment_softmax on a scalar");
  const std::size_t rows = x.dim(0);
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != rows ||
      !std::is_sorted(offsets.begin(), offsets.end())) {
    throw DimensionError("segment_softmax: offsets must rise from 0 to " + std::to_string(rows));
  }
  const std::size_t inner = rows ? x.size() / rows : 0;
  std::vector<double> v(x.size());
  const double* px = x.data().data();
  std::vector<double> mx(inner);
  std::vector<double> z(inner);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const std::size_t lo = offsets[s], hi = offsets[s + 1];
    if (lo == hi) continue;
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    std::fill(z.begin(), z.end(), 0.0);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t i = 0; i < inner; ++i) mx[i] = std::max(mx[i], px[r * inner + i]);
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t i = 0; i < inner; ++i) {
        const double e = std::exp(px[r * inner + i] - mx[i]);
        v[r * inner + i] = e;
        z[i] += e;
      }
    for (std::size_t r = lo; r < hi; ++r)
      for (std::size_t i = 0; i < inner; ++i) v[r * inner + i] /= z[i];
  }
  auto out = make_node(x.shape(), std::move(v));
  Node* nx = x.node();
  Node* no = out.get();
  return finish("segment_softmax", {&x}, out,
                [=, offs = std::vector<std::size_t>(offsets.begin(), offsets.end())] {
                  auto& gx = nx->grad_buffer();
                  const auto& y = no->value;
                  const auto& g = no->grad;
                  std::vector<double> dot(inner);
                  for (std::size_t s = 0; s + 1 < offs.size(); ++s) {
                    const std::size_t lo = offs[s], hi = offs[s + 1];
                    std::fill(dot.begin(), dot.end(), 0.0);
                    for (std::size_t r = lo; r < hi; ++r)
                      for (std::size_t i = 0; i < inner; ++i) dot[i] += g[r * inner + i] * y[r * inner + i];
                    for (std::size_t r = lo; r < hi; ++r)
                      for (std::size_t i = 0; i < inner; ++i) {
                        const std::size_t k = r * inner + i;
                        gx[k] += y[k] * (g[k] - dot[i]);
                      }
                  }
                });
}

}  // namespace tcat::diff
