#include "tcat/network/model.hpp"

#include <algorithm>
#include <cmath>

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::net {

using diff::Tensor;

std::size_t level_width(const ModelConfig& config, std::size_t i) {
  return i == 0 ? config.stem_width : config.level_widths.at(i - 1);
}

Model build_model(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config = config;
  diff::Rng rng(config.seed);
  m.stem = diff::make_affine(m.params, "stem", 6, config.stem_width, rng);
  for (std::size_t i = 1; i <= config.levels(); ++i) {
    const std::string prefix = "enc" + std::to_string(i);
    const std::size_t w = level_width(config, i), prev = level_width(config, i - 1);
    EncoderLevel level;
    level.sgda = sgda::make_sgda(m.params, prefix, w, prev, rng);
    level.dpda = dpda::make_dpda(m.params, prefix, static_cast<int>(i), w,
                                 i > 1 ? prev : w, config.m_superpoints, rng);
    level.out = diff::make_affine(m.params, prefix + ".out", w, w, rng);
    m.encoder.push_back(std::move(level));
  }
  for (std::size_t j = 0; j < config.levels(); ++j) {
    const std::size_t w = level_width(config, j), coarse = level_width(config, j + 1);
    m.decoder.push_back(
        diff::make_affine(m.params, "dec" + std::to_string(j), coarse + w, w, rng));
  }
  const std::size_t c0 = config.stem_width;
  m.seg_head = diff::make_mlp(m.params, "head.seg", {c0, c0, config.n_classes}, rng);
  m.off_head = diff::make_mlp(m.params, "head.off", {c0, c0, 3}, rng);
  return m;
}

attn::PointSet featurize(const Model& model, const geom::Coords& points,
                         const geom::Coords& normals, const geom::Normalization& norm) {
  if (points.size() != normals.size()) throw SizeError("featurize: points and normals differ in length");
  std::vector<double> raw;
  raw.reserve(points.size() * 6);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& nv = normals[i];
    const double len = std::sqrt(nv[0] * nv[0] + nv[1] * nv[1] + nv[2] * nv[2]);
    if (!(std::abs(len - 1.0) <= 1e-3)) {
      throw ValidationError("featurize: normal " + std::to_string(i) + " has length " +
                            std::to_string(len));
    }
    const auto p = norm.apply(points[i]);
    raw.insert(raw.end(), p.begin(), p.end());
    raw.insert(raw.end(), nv.begin(), nv.end());
  }
  const Tensor input = Tensor::from({points.size(), 6}, std::move(raw));
  const Tensor xyz = geom::to_tensor(norm.apply(points));
  return {xyz, diff::relu(diff::affine_apply(model.stem, input))};
}

Encoded encode(const Model& model, const attn::PointSet& input) {
  const ModelConfig& cfg = model.config;
  Encoded e;
  e.levels.push_back(input);
  for (std::size_t i = 1; i <= cfg.levels(); ++i) {
    const attn::PointSet& prev = e.levels.back();
    const EncoderLevel& p = model.encoder[i - 1];
    const geom::Coords prev_x = geom::from_tensor(prev.X);
    const std::size_t n = prev.size() / 4;
    if (n == 0) throw ContractError("encode: level " + std::to_string(i) + " would be empty");

    const auto idx = geom::farthest_point_sample(prev_x, n);
    const attn::PointSet lifted{prev.X, diff::affine_apply(p.sgda.lift, prev.F)};
    const attn::PointSet queries{diff::gather(prev.X, 0, idx), diff::gather(lifted.F, 0, idx)};

    const dpda::Superpoints* prev_z = e.superpoints.empty() ? nullptr : &e.superpoints.back();
    dpda::Superpoints z = dpda::dpda_step(static_cast<int>(i), prev_z, queries, p.dpda);

    const auto table = geom::ball_query(geom::from_tensor(queries.X), prev_x,
                                        cfg.ball_radii[i - 1], cfg.k_neighbors);
    const Tensor local = sgda::local_attention(queries, lifted, table, p.sgda.local);
    const Tensor global = sgda::global_branch(queries, z, p.sgda);
    const Tensor fused = sgda::sgda_fuse(local, global, p.sgda.raw_alpha);

    e.levels.push_back({queries.X, diff::add(diff::affine_apply(p.out, fused), queries.F)});
    e.superpoints.push_back(std::move(z));
  }
  return e;
}

Tensor interpolate_features(const geom::Coords& fine, const geom::Coords& coarse,
                            const Tensor& coarse_features) {
  if (coarse.empty()) throw SizeError("interpolate_features: no coarse points");
  const std::size_t k = std::min<std::size_t>(3, coarse.size());
  const auto table = geom::knn(fine, coarse, k);
  std::vector<std::size_t> rows, owner;
  std::vector<double> weights;
  rows.reserve(fine.size() * k);
  std::vector<geom::Point3> nbrs(k);
  for (std::size_t q = 0; q < fine.size(); ++q) {
    const auto r = table.row(q);
    for (std::size_t j = 0; j < k; ++j) nbrs[j] = coarse[r[j]];
    const auto w = geom::idw_weights(fine[q], nbrs);
    for (std::size_t j = 0; j < k; ++j) {
      rows.push_back(r[j]);
      owner.push_back(q);
      weights.push_back(w[j]);
    }
  }
  const std::size_t pairs = weights.size();
  const Tensor w = Tensor::from({pairs}, std::move(weights));
  const Tensor picked = diff::mul_rows(diff::gather(coarse_features, 0, rows), w);
  return diff::scatter_add(picked, 0, owner, fine.size());
}

Tensor decode(const Model& model, const std::vector<attn::PointSet>& levels) {
  if (levels.size() != model.decoder.size() + 1) {
    throw ContractError("decode: expected " + std::to_string(model.decoder.size() + 1) + " levels");
  }
  Tensor cur = levels.back().F;
  for (std::size_t j = model.decoder.size(); j-- > 0;) {
    const Tensor up = interpolate_features(geom::from_tensor(levels[j].X),
                                           geom::from_tensor(levels[j + 1].X), cur);
    cur = diff::relu(diff::affine_apply(model.decoder[j], diff::concat({up, levels[j].F}, 1)));
  }
  return cur;
}

std::pair<Tensor, Tensor> heads(const Model& model, const Tensor& decoded) {
  return {diff::mlp_apply(model.seg_head, decoded), diff::mlp_apply(model.off_head, decoded)};
}

ModelOutput forward(const Model& model, const geom::Coords& points, const geom::Coords& normals) {
  if (points.size() != model.config.n_input) {
    throw SizeError("forward: expected " + std::to_string(model.config.n_input) + " points, got " +
                    std::to_string(points.size()));
  }
  const auto order = geom::canonical_order(points);
  std::vector<std::size_t> rank(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  geom::Coords sorted_p(points.size()), sorted_n(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_p[i] = points[order[i]];
    sorted_n[i] = normals.at(order[i]);
  }

  ModelOutput out;
  // Fitted on the sorted copy so summation order, and thus rounding, is
  // independent of the caller's row order.
  out.normalization = geom::fit_normalization(sorted_p);
  Encoded e = encode(model, featurize(model, sorted_p, sorted_n, out.normalization));
  const auto [logits, offsets] = heads(model, decode(model, e.levels));
  out.logits = diff::gather(logits, 0, rank);
  out.offsets = diff::gather(offsets, 0, rank);
  out.tcp_positions = dpda::tcp_all_levels(e.superpoints);
  out.level_points = std::move(e.levels);
  out.superpoints = std::move(e.superpoints);
  return out;
}

ModelOutput forward(const Model& model, const data::LabeledCloud& cloud) {
  return forward(model, cloud.points, cloud.normals);
}

std::vector<int> argmax_labels(const Tensor& logits) {
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  const auto v = logits.data();
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j) {
      if (v[i * c + j] > v[i * c + best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> predict_full(const geom::Coords& raw_points, const geom::Coords& sampled_points,
                              const Tensor& logits) {
  const std::vector<int> labels = argmax_labels(logits);
  if (raw_points.size() == sampled_points.size()) {
    const auto ro = geom::canonical_order(raw_points);
    const auto so = geom::canonical_order(sampled_points);
    bool same = true;
    for (std::size_t i = 0; i < ro.size() && same; ++i) {
      same = raw_points[ro[i]] == sampled_points[so[i]];
    }
    if (same) {
      std::vector<int> out(raw_points.size());
      for (std::size_t i = 0; i < ro.size(); ++i) out[ro[i]] = labels[so[i]];
      return out;
    }
  }
  const geom::Normalization norm = geom::fit_normalization(sampled_points);
  return geom::propagate_labels(norm.apply(sampled_points), labels, norm.apply(raw_points), 5);
}

Targets make_targets(const data::LabeledCloud& cloud, const geom::Normalization& norm) {
  Targets t;
  t.labels = cloud.labels;
  const Tensor raw = data::derive_offsets(cloud);
  std::vector<double> scaled(raw.data().begin(), raw.data().end());
  for (double& v : scaled) v *= norm.scale;
  t.offsets = Tensor::from({cloud.size(), 3}, std::move(scaled));
  t.centroids = norm.apply(cloud.centroid_positions());
  return t;
}

std::pair<Tensor, loss::LossBreakdown> model_loss(const ModelOutput& out, const Targets& targets,
                                                  loss::TcpLossLevels levels) {
  const Tensor seg = loss::loss_seg(out.logits, targets.labels);
  const Tensor tcp = loss::loss_tcp(out.tcp_positions, targets.centroids, levels);
  const Tensor off = loss::loss_offset(out.offsets, targets.offsets);
  return loss::loss_total(seg, tcp, off);
}

std::pair<Tensor, loss::LossBreakdown> sample_loss(const Model& model,
                                                   const data::LabeledCloud& cloud) {
  const ModelOutput out = forward(model, cloud);
  return model_loss(out, make_targets(cloud, out.normalization), model.config.tcp_loss_levels);
}

std::string param_group(const std::string& name) {
  const auto first = name.find('.');
  if (first == std::string::npos) return name;
  const auto second = name.find('.', first + 1);
  const std::string part = name.substr(first + 1, second == std::string::npos
                                                      ? std::string::npos
                                                      : second - first - 1);
  const bool leaf_part = part == "W" || part == "b" ||
                         (!part.empty() && std::all_of(part.begin(), part.end(), ::isdigit));
  return leaf_part ? name.substr(0, first) : name.substr(0, second);
}

}  // namespace tcat::net
