#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcat/attention/cwa.hpp"
#include "tcat/data/cloud.hpp"
#include "tcat/diff/mlp.hpp"
#include "tcat/diff/params.hpp"
#include "tcat/dpda/dpda.hpp"
#include "tcat/geom/geom.hpp"
#include "tcat/loss/losses.hpp"
#include "tcat/network/config.hpp"
#include "tcat/sgda/sgda.hpp"

namespace tcat::net {

struct EncoderLevel {
  sgda::SgdaParams sgda;
  dpda::DpdaParams dpda;
  diff::Affine out;  // fused features -> level width, added to the lifted query features
};

/// Parameters are registered in construction order under
/// stem, enc<i>.*, dec<j>, head.seg, head.off.
struct Model {
  ModelConfig config;
  diff::ParamStore params;
  diff::Affine stem;
  std::vector<EncoderLevel> encoder;  // index i-1 holds level i
  std::vector<diff::Affine> decoder;  // index j fuses level j+1 into level j
  diff::MLPParams seg_head;
  diff::MLPParams off_head;
};

/// Validates the config and initializes every parameter from `config.seed`.
Model build_model(const ModelConfig& config);

/// Width of encoder level i (0 = stem).
std::size_t level_width(const ModelConfig& config, std::size_t i);

/// Per-point outputs are in the caller's point order; coordinates live in the
/// normalized frame recorded in `normalization`.
struct ModelOutput {
  diff::Tensor logits;   // [n, n_classes]
  diff::Tensor offsets;  // [n, 3]
  std::vector<diff::Tensor> tcp_positions;   // per level, [M, 3]
  std::vector<attn::PointSet> level_points;  // level 0 (canonical order) .. L
  std::vector<dpda::Superpoints> superpoints;
  geom::Normalization normalization;
};

/// Normalized coordinates joined with normals, lifted by affine + ReLU.
attn::PointSet featurize(const Model& model, const geom::Coords& points,
                         const geom::Coords& normals, const geom::Normalization& norm);

struct Encoded {
  std::vector<attn::PointSet> levels;  // level 0 .. L
  std::vector<dpda::Superpoints> superpoints;
};

Encoded encode(const Model& model, const attn::PointSet& input);

/// 3-NN inverse-distance interpolation of `coarse` features onto `fine`
/// positions. Rows are convex combinations of coarse rows.
diff::Tensor interpolate_features(const geom::Coords& fine, const geom::Coords& coarse,
                                  const diff::Tensor& coarse_features);

/// Returns features at level 0 resolution with the stem width.
diff::Tensor decode(const Model& model, const std::vector<attn::PointSet>& levels);

std::pair<diff::Tensor, diff::Tensor> heads(const Model& model, const diff::Tensor& decoded);

/// Requires exactly n_input points.
ModelOutput forward(const Model& model, const geom::Coords& points, const geom::Coords& normals);
ModelOutput forward(const Model& model, const data::LabeledCloud& cloud);

/// Row-wise argmax, lowest index on ties.
std::vector<int> argmax_labels(const diff::Tensor& logits);

/// Labels for every raw point. When the raw cloud is exactly the sampled set
/// the argmax labels are returned unchanged; otherwise each raw point takes the
/// 5-NN majority of the sampled predictions.
std::vector<int> predict_full(const geom::Coords& raw_points, const geom::Coords& sampled_points,
                              const diff::Tensor& logits);

/// Ground truth expressed in a forward pass's normalized frame.
struct Targets {
  std::vector<int> labels;
  diff::Tensor offsets;  // [n,3]
  geom::Coords centroids;
};

Targets make_targets(const data::LabeledCloud& cloud, const geom::Normalization& norm);

std::pair<diff::Tensor, loss::LossBreakdown> model_loss(const ModelOutput& out,
                                                        const Targets& targets,
                                                        loss::TcpLossLevels levels);

/// forward + model_loss on one cloud with n_input points.
std::pair<diff::Tensor, loss::LossBreakdown> sample_loss(const Model& model,
                                                         const data::LabeledCloud& cloud);

/// First two dot-separated components of a parameter name ("enc1.ga.0.W" ->
/// "enc1.ga"); single-component names map to themselves.
std::string param_group(const std::string& name);

}  // namespace tcat::net
