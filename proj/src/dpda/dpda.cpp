#include "tcat/dpda/dpda.hpp"

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::dpda {

using diff::Tensor;

DpdaParams make_dpda(diff::ParamStore& store, const std::string& prefix, int level,
                     std::size_t width, std::size_t prev_width, std::size_t m, diff::Rng& rng) {
  if (level < 1 || level > kMaxLevel) {
    throw ContractError("dpda level must be in 1.." + std::to_string(kMaxLevel));
  }
  DpdaParams p;
  p.width = width;
  p.tcp_embedding = store.add_uniform(prefix + ".tcp", {m, width}, 1.0, rng);
  p.raw_beta = store.add_zeros(prefix + ".beta", {});
  p.ga = attn::make_cwa(store, prefix + ".ga", width, rng);
  p.laya = attn::make_cwa(store, prefix + ".laya", width, rng);
  if (level > 1 && prev_width != width) {
    p.laya_proj = diff::make_affine(store, prefix + ".proj", prev_width, width, rng);
  }
  return p;
}

Tensor interpolate_positions(const Tensor& H, const attn::PointSet& points) {
  if (H.rank() != 2 || H.dim(1) != points.width()) {
    throw DimensionError("interpolate_positions: superpoint features " +
                         diff::shape_str(H.shape()) + " vs point features " +
                         diff::shape_str(points.F.shape()));
  }
  const Tensor logits = diff::matmul(H, diff::transpose(points.F));
  return diff::matmul(diff::softmax(logits, 1), points.X);
}

Tensor beta(const DpdaParams& params) { return diff::sigmoid(params.raw_beta); }

Superpoints dpda_step(int level, const Superpoints* prev, const attn::PointSet& points,
                      const DpdaParams& params) {
  if (level < 1 || level > kMaxLevel) {
    throw ContractError("dpda_step: level " + std::to_string(level) + " outside 1.." +
                        std::to_string(kMaxLevel));
  }
  if (points.size() == 0) throw SizeError("dpda_step: empty point set");
  if (level > 1 && prev == nullptr) {
    throw ContractError("dpda_step: level " + std::to_string(level) +
                        " needs the previous level's superpoints");
  }

  const Tensor& H = params.tcp_embedding;
  const attn::PointSet z{interpolate_positions(H, points), H};
  Tensor h_new = attn::cwa_update(params.ga, z, points);

  if (level > 1) {
    Tensor prev_h = prev->H;
    if (params.laya_proj) prev_h = diff::affine_apply(*params.laya_proj, prev_h);
    const attn::PointSet z_prev{prev->Y, prev_h};
    const Tensor layer = attn::cwa_update(params.laya, z, z_prev);
    // beta * GA + (1 - beta) * LayA, written as LayA + beta (GA - LayA).
    h_new = diff::add(layer, diff::mul(diff::sub(h_new, layer), beta(params)));
  }

  Superpoints out;
  out.Y = interpolate_positions(h_new, points);
  out.H = std::move(h_new);
  out.level = level;
  return out;
}

std::vector<Tensor> tcp_all_levels(const std::vector<Superpoints>& levels) {
  std::vector<Tensor> out;
  out.reserve(levels.size());
  for (const auto& z : levels) out.push_back(z.Y);
  return out;
}

}  // namespace tcat::dpda
