#include "tcat/loss/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "tcat/diff/ops.hpp"
#include "tcat/errors.hpp"

namespace tcat::loss {

using diff::Tensor;

double smooth_l1(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("smooth_l1: length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    total += d < 1.0 ? 0.5 * d * d : d - 0.5;
  }
  return total;
}

Assignment match_centroids(const Tensor& predicted, const geom::Coords& centroids) {
  const geom::Coords pred = geom::from_tensor(predicted);
  CostMatrix cost(pred.size(), std::vector<double>(centroids.size()));
  for (std::size_t i = 0; i < pred.size(); ++i)
    for (std::size_t j = 0; j < centroids.size(); ++j)
      cost[i][j] = geom::distance(pred[i], centroids[j]);
  return hungarian(cost);
}

Tensor loss_tcp(const std::vector<Tensor>& tcp_levels, const geom::Coords& gt_centroids,
                TcpLossLevels levels) {
  if (tcp_levels.empty()) throw ContractError("loss_tcp: no superpoint levels");
  if (gt_centroids.empty()) throw ValidationError("loss_tcp: no ground-truth centroids");
  const std::size_t first = levels == TcpLossLevels::last ? tcp_levels.size() - 1 : 0;
  Tensor total;
  for (std::size_t l = first; l < tcp_levels.size(); ++l) {
    const Tensor& y = tcp_levels[l];
    if (gt_centroids.size() > y.dim(0)) {
      throw ValidationError("loss_tcp: more teeth than superpoints (" +
                            std::to_string(gt_centroids.size()) + " > " +
                            std::to_string(y.dim(0)) + ")");
    }
    const Assignment match = match_centroids(y, gt_centroids);
    std::vector<std::size_t> rows;
    std::vector<double> target;
    for (const auto& [p, g] : match.pairs) {
      rows.push_back(p);
      target.insert(target.end(), gt_centroids[g].begin(), gt_centroids[g].end());
    }
    const Tensor matched = diff::gather(y, 0, rows);
    const Tensor gt = Tensor::from({rows.size(), 3}, std::move(target));
    const Tensor term = diff::sum(diff::smooth_l1(diff::sub(matched, gt), 1.0));
    total = total.defined() ? diff::add(total, term) : term;
  }
  return total;
}

namespace {

// For each row of `from`, the index of its nearest row in `to` (lowest on ties).
std::vector<std::size_t> nearest_rows(const Tensor& from, const Tensor& to) {
  const std::size_t n = from.dim(0), m = to.dim(0);
  const auto a = from.data();
  const auto b = to.data();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = a[i * 3] - b[j * 3];
      const double dy = a[i * 3 + 1] - b[j * 3 + 1];
      const double dz = a[i * 3 + 2] - b[j * 3 + 2];
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        idx[i] = j;
      }
    }
  }
  return idx;
}

}  // namespace

Tensor loss_offset(const Tensor& pred, const Tensor& gt) {
  for (const Tensor* t : {&pred, &gt}) {
    if (t->rank() != 2 || t->dim(1) != 3) {
      throw DimensionError("loss_offset: offsets must be [n,3], got " +
                           diff::shape_str(t->shape()));
    }
  }
  if (pred.dim(0) == 0 || gt.dim(0) == 0) throw ValidationError("loss_offset: empty offset set");

  // sum over o in O of min over predicted, then over predicted of min over O.
  const auto gt_to_pred = nearest_rows(gt, pred);
  const auto pred_to_gt = nearest_rows(pred, gt);
  const Tensor forward = diff::sum(diff::square(diff::sub(gt, diff::gather(pred, 0, gt_to_pred))));
  const Tensor backward = diff::sum(diff::square(diff::sub(pred, diff::gather(gt, 0, pred_to_gt))));
  return diff::scale(diff::add(forward, backward), 1.0 / static_cast<double>(gt.dim(0)));
}

Tensor loss_seg(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw DimensionError("loss_seg: logits " + diff::shape_str(logits.shape()) + " vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (n == 0) throw ValidationError("loss_seg: no points");
  std::vector<std::size_t> flat(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
      throw ValidationError("loss_seg: label " + std::to_string(labels[i]) +
                            " outside [0," + std::to_string(c) + ")");
    }
    flat[i] = i * c + static_cast<std::size_t>(labels[i]);
  }
  const Tensor logp = diff::reshape(diff::log_softmax(logits, 1), {n * c});
  return diff::neg(diff::mean(diff::gather(logp, 0, flat)));
}

std::pair<Tensor, LossBreakdown> loss_total(const Tensor& seg, const Tensor& tcp,
                                            const Tensor& offset) {
  Tensor total = diff::add(diff::add(seg, tcp), offset);
  LossBreakdown b;
  b.seg = seg.item();
  b.tcp = tcp.item();
  b.offset = offset.item();
  b.total = total.item();
  return {std::move(total), b};
}

}  // namespace tcat::loss
