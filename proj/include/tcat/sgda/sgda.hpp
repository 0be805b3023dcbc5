#pragma once

#include <cstddef>
#include <string>

#include "tcat/attention/cwa.hpp"
#include "tcat/diff/mlp.hpp"
#include "tcat/dpda/dpda.hpp"
#include "tcat/geom/geom.hpp"

// Superpoint guided dual attention: per-point fusion of neighborhood
// attention (local) with attention over the level's superpoints (global).
namespace tcat::sgda {

struct SgdaParams {
  diff::Affine lift;  // previous width -> this width, applied before attention
  attn::CWAParams local;
  attn::CWAParams global;
  diff::Tensor raw_alpha;  // scalar; alpha = sigmoid(raw_alpha)
};

SgdaParams make_sgda(diff::ParamStore& store, const std::string& prefix, std::size_t width,
                     std::size_t prev_width, diff::Rng& rng);

diff::Tensor alpha(const SgdaParams& params);

/// Lifts the previous level's features, ball-queries `points.X` against
/// `prev.X` and attends each point over its neighborhood.
diff::Tensor local_branch(const attn::PointSet& points, const attn::PointSet& prev,
                          double radius, std::size_t k, const SgdaParams& params);

/// Neighborhood attention with keys already lifted to the query width.
diff::Tensor local_attention(const attn::PointSet& points, const attn::PointSet& lifted_prev,
                             const geom::NeighborTable& neighbors, const attn::CWAParams& cwa);

diff::Tensor global_branch(const attn::PointSet& points, const dpda::Superpoints& refined,
                           const SgdaParams& params);

/// alpha * global + (1 - alpha) * local.
diff::Tensor sgda_fuse(const diff::Tensor& local, const diff::Tensor& global,
                       const diff::Tensor& raw_alpha);

}  // namespace tcat::sgda
