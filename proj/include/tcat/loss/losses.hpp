#pragma once

#include <span>
#include <utility>
#include <vector>

#include "tcat/diff/tensor.hpp"
#include "tcat/geom/geom.hpp"
#include "tcat/loss/hungarian.hpp"

namespace tcat::loss {

enum class TcpLossLevels { all, last };

struct LossBreakdown {
  double seg = 0.0;
  double tcp = 0.0;
  double offset = 0.0;
  double total = 0.0;
};

/// Per-coordinate 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise, summed.
double smooth_l1(std::span<const double> a, std::span<const double> b);

/// Optimal matching of predicted positions [P,3] to ground-truth centroids
/// on Euclidean cost.
Assignment match_centroids(const diff::Tensor& predicted, const geom::Coords& centroids);

/// Hungarian-matched smooth-L1 between superpoint positions and centroids,
/// summed over the configured levels. The matching is constant in backward.
diff::Tensor loss_tcp(const std::vector<diff::Tensor>& tcp_levels,
                      const geom::Coords& gt_centroids,
                      TcpLossLevels levels = TcpLossLevels::all);

/// Symmetric Chamfer between predicted and ground-truth offset sets, both
/// directions normalized by the ground-truth count. Nearest-neighbor indices
/// are constant in backward.
diff::Tensor loss_offset(const diff::Tensor& pred, const diff::Tensor& gt);

/// Mean cross-entropy of logits [n,c] against integer labels.
diff::Tensor loss_seg(const diff::Tensor& logits, std::span<const int> labels);

/// Unweighted sum of the three terms.
std::pair<diff::Tensor, LossBreakdown> loss_total(const diff::Tensor& seg,
                                                  const diff::Tensor& tcp,
                                                  const diff::Tensor& offset);

}  // namespace tcat::loss
