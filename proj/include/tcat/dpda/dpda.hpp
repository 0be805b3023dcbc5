#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tcat/attention/cwa.hpp"
#include "tcat/diff/mlp.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/diff/tensor.hpp"

// Dental perception dual attention: a fixed set of superpoints per encoder
// level whose positions are softmax-interpolated from the level's points and
// whose features mix global aggregation over the points (GA) with attention
// over the previous level's superpoints (LayA).
namespace tcat::dpda {

inline constexpr std::size_t kSuperpoints = 16;
inline constexpr int kMaxLevel = 4;

struct Superpoints {
  diff::Tensor Y;  // [M,3]
  diff::Tensor H;  // [M,C]
  int level = 0;

  std::size_t count() const { return Y.dim(0); }
  attn::PointSet as_point_set() const { return {Y, H}; }
};

struct DpdaParams {
  diff::Tensor tcp_embedding;  // [M,C], learnable initial superpoint features
  diff::Tensor raw_beta;       // scalar; beta = sigmoid(raw_beta)
  attn::CWAParams ga;
  attn::CWAParams laya;
  std::optional<diff::Affine> laya_proj;  // previous width -> this width, when they differ
  std::size_t width = 0;
};

/// Registers one level's parameters under `prefix`. `prev_width` is the
/// previous level's feature width (ignored at level 1).
DpdaParams make_dpda(diff::ParamStore& store, const std::string& prefix, int level,
                     std::size_t width, std::size_t prev_width, std::size_t m, diff::Rng& rng);

/// softmax_rows(H F^T) X: each row is a convex combination of the points.
diff::Tensor interpolate_positions(const diff::Tensor& H, const attn::PointSet& points);

diff::Tensor beta(const DpdaParams& params);

/// One dual-attention update. Level 1 has no previous superpoints and uses
/// GA alone (beta fixed to 1).
Superpoints dpda_step(int level, const Superpoints* prev, const attn::PointSet& points,
                      const DpdaParams& params);

/// Refined positions of every level, in level order.
std::vector<diff::Tensor> tcp_all_levels(const std::vector<Superpoints>& levels);

}  // namespace tcat::dpda
