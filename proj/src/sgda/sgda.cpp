#include "tcat/sgda/sgda.hpp"

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::sgda {

using diff::Tensor;

SgdaParams make_sgda(diff::ParamStore& store, const std::string& prefix, std::size_t width,
                     std::size_t prev_width, diff::Rng& rng) {
  SgdaParams p;
  p.lift = diff::make_affine(store, prefix + ".lift", prev_width, width, rng);
  p.local = attn::make_cwa(store, prefix + ".loca", width, rng);
  p.global = attn::make_cwa(store, prefix + ".sg", width, rng);
  p.raw_alpha = store.add_zeros(prefix + ".alpha", {});
  return p;
}

Tensor alpha(const SgdaParams& params) { return diff::sigmoid(params.raw_alpha); }

Tensor local_attention(const attn::PointSet& points, const attn::PointSet& lifted_prev,
                       const geom::NeighborTable& neighbors, const attn::CWAParams& cwa) {
  return attn::cwa_update_masked(cwa, points, lifted_prev, neighbors);
}

Tensor local_branch(const attn::PointSet& points, const attn::PointSet& prev, double radius,
                    std::size_t k, const SgdaParams& params) {
  const attn::PointSet lifted{prev.X, diff::affine_apply(params.lift, prev.F)};
  const auto table = geom::ball_query(geom::from_tensor(points.X), geom::from_tensor(prev.X),
                                      radius, k);
  return local_attention(points, lifted, table, params.local);
}

Tensor global_branch(const attn::PointSet& points, const dpda::Superpoints& refined,
                     const SgdaParams& params) {
  return attn::cwa_update(params.global, points, refined.as_point_set());
}

Tensor sgda_fuse(const Tensor& local, const Tensor& global, const Tensor& raw_alpha) {
  if (local.shape() != global.shape()) {
    throw DimensionError("sgda_fuse: local " + diff::shape_str(local.shape()) +
                         " vs global " + diff::shape_str(global.shape()));
  }
  // local + alpha (global - local) keeps local == global a fixed point exactly.
  return diff::add(local, diff::mul(diff::sub(global, local), diff::sigmoid(raw_alpha)));
}

}  // namespace tcat::sgda
