#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcat/diff/tensor.hpp"

// Differentiable primitives. Every op records a backward rule on the active
// tape when at least one input requires grad; otherwise it only computes.
namespace tcat::diff {

// Elementwise binary ops. `b` may match `a`'s shape, be a single value, or
// match a suffix of `a`'s shape (repeated over the leading extents).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor neg(const Tensor& x);

// ReLU'(0) is taken as 0.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
// 0.5 d^2 / beta when |d| < beta, |d| - 0.5 beta otherwise.
Tensor smooth_l1(const Tensor& x, double beta = 1.0);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, std::size_t axis);
Tensor mean_axis(const Tensor& x, std::size_t axis);
// Gradient goes to the first maximal element along the axis.
Tensor max_axis(const Tensor& x, std::size_t axis);

Tensor softmax(const Tensor& x, std::size_t axis);
Tensor log_softmax(const Tensor& x, std::size_t axis);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);

// out[..., j, ...] = x[..., index[j], ...] along `axis`.
Tensor gather(const Tensor& x, std::size_t axis,
              std::span<const std::size_t> index);
// out has extent `extent` along `axis`; out[..., index[j], ...] += x[..., j, ...].
Tensor scatter_add(const Tensor& x, std::size_t axis,
                   std::span<const std::size_t> index, std::size_t extent);

// out[i, ...] = x[i, ...] * w[i]; w has shape [x.dim(0)].
Tensor mul_rows(const Tensor& x, const Tensor& w);

// Softmax over the rows of each contiguous segment [offsets[s], offsets[s+1]),
// independently for every column. offsets is non-decreasing, starts at 0 and
// ends at x.dim(0).
Tensor segment_softmax(const Tensor& x, std::span<const std::size_t> offsets);

}  // namespace tcat::diff
