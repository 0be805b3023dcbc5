#include "tcat/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "tcat/errors.hpp"
#include "tcat/loss/hungarian.hpp"

namespace tcat::metrics {

std::vector<ToothInstance> extract_instances(const geom::Coords& points,
                                             std::span<const int> labels,
                                             std::span<const int> instances) {
  if (points.size() != labels.size() || points.size() != instances.size()) {
    throw SizeError("extract_instances: points, labels and instances differ in length");
  }
  std::map<int, ToothInstance> by_id;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (instances[i] <= 0) continue;
    auto [it, inserted] = by_id.try_emplace(instances[i]);
    if (inserted) {
      it->second.id = instances[i];
      it->second.label = labels[i];
    }
    it->second.members.push_back(i);
  }
  std::vector<ToothInstance> out;
  out.reserve(by_id.size());
  for (auto& [id, inst] : by_id) {
    geom::Point3 lo{}, hi{}, sum{};
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::numeric_limits<double>::infinity();
      hi[d] = -std::numeric_limits<double>::infinity();
    }
    for (std::size_t i : inst.members) {
      for (int d = 0; d < 3; ++d) {
        sum[d] += points[i][d];
        lo[d] = std::min(lo[d], points[i][d]);
        hi[d] = std::max(hi[d], points[i][d]);
      }
    }
    const double n = static_cast<double>(inst.members.size());
    for (int d = 0; d < 3; ++d) inst.centroid[d] = sum[d] / n;
    inst.bbox_diagonal = geom::distance(lo, hi);
    out.push_back(std::move(inst));
  }
  return out;
}

Confusion confusion(std::span<const int> pred, std::span<const int> gt, std::size_t n_classes) {
  if (pred.size() != gt.size()) throw SizeError("confusion: prediction and truth differ in length");
  Confusion c(n_classes, std::vector<std::size_t>(n_classes, 0));
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int v : {pred[i], gt[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= n_classes) {
        throw ValidationError("confusion: label " + std::to_string(v) + " outside [0," +
                              std::to_string(n_classes) + ")");
      }
    }
    ++c[static_cast<std::size_t>(gt[i])][static_cast<std::size_t>(pred[i])];
  }
  return c;
}

namespace {

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

PointMetrics point_metrics(const Confusion& conf) {
  const std::size_t c = conf.size();
  std::vector<double> row(c, 0.0), col(c, 0.0);
  double total = 0.0, trace = 0.0;
  for (std::size_t g = 0; g < c; ++g) {
    for (std::size_t p = 0; p < c; ++p) {
      const double v = static_cast<double>(conf[g][p]);
      row[g] += v;
      col[p] += v;
      total += v;
    }
    trace += static_cast<double>(conf[g][g]);
  }
  PointMetrics m;
  m.oa = ratio(trace, total);

  std::size_t present = 0;
  for (std::size_t k = 1; k < c; ++k) {
    if (row[k] == 0.0) continue;
    ++present;
    const double tp = static_cast<double>(conf[k][k]);
    const double fn = row[k] - tp;
    const double fp = col[k] - tp;
    m.sen += ratio(tp, tp + fn);
    m.ppv += ratio(tp, tp + fp);
    m.dsc += ratio(2.0 * tp, 2.0 * tp + fp + fn);
  }
  if (present == 0) {
    m.sen = m.ppv = m.dsc = 1.0;
  } else {
    const double n = static_cast<double>(present);
    m.sen /= n;
    m.ppv /= n;
    m.dsc /= n;
  }
  return m;
}

double identification_rate(std::span<const int> pred, const std::vector<ToothInstance>& gt) {
  if (gt.empty()) return 1.0;
  std::size_t correct = 0;
  for (const auto& inst : gt) {
    std::map<int, std::size_t> votes;
    for (std::size_t i : inst.members) {
      if (i >= pred.size()) throw IndexError("identification_rate: member index out of range");
      ++votes[pred[i]];
    }
    int best = 0;
    std::size_t best_count = 0;
    for (const auto& [label, count] : votes) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    if (best == inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gt.size());
}

double localization_accuracy(const geom::Coords& tcp, const std::vector<ToothInstance>& gt) {
  if (gt.empty()) throw ValidationError("localization_accuracy: no ground-truth teeth");
  if (gt.size() > tcp.size()) {
    throw ValidationError("localization_accuracy: more teeth than superpoints");
  }
  loss::CostMatrix cost(tcp.size(), std::vector<double>(gt.size()));
  for (std::size_t i = 0; i < tcp.size(); ++i)
    for (std::size_t j = 0; j < gt.size(); ++j) cost[i][j] = geom::distance(tcp[i], gt[j].centroid);
  const loss::Assignment match = loss::hungarian(cost);
  double total = 0.0;
  for (const auto& [p, g] : match.pairs) {
    const double rho = gt[g].bbox_diagonal;
    const double d = cost[p][g];
    const double acc = rho > 0.0 ? std::max(0.0, 1.0 - d / rho) : (d == 0.0 ? 1.0 : 0.0);
    total += acc;
  }
  return total / static_cast<double>(gt.size());
}

double segmentation_accuracy(std::span<const int> pred, std::span<const int> gt,
                             const std::vector<ToothInstance>& instances) {
  if (pred.size() != gt.size()) {
    throw SizeError("segmentation_accuracy: prediction and truth differ in length");
  }
  std::size_t total = 0, correct = 0;
  for (const auto& inst : instances) {
    for (std::size_t i : inst.members) {
      ++total;
      if (pred[i] == gt[i]) ++correct;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

MetricsReport evaluate(const EvalInput& in) {
  const auto instances = extract_instances(in.points, in.gt_labels, in.gt_instances);
  const PointMetrics pm = point_metrics(confusion(in.pred_labels, in.gt_labels, in.n_classes));
  MetricsReport r;
  r.oa = pm.oa;
  r.dsc = pm.dsc;
  r.sen = pm.sen;
  r.ppv = pm.ppv;
  r.tir = identification_rate(in.pred_labels, instances);
  r.tla = instances.empty() ? 1.0 : localization_accuracy(in.tcp, instances);
  r.tsa = segmentation_accuracy(in.pred_labels, in.gt_labels, instances);
  r.score = (r.tla + r.tsa + r.tir) / 3.0;
  return r;
}

MetricsReport mean_report(std::span<const MetricsReport> reports) {
  MetricsReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.oa += r.oa;
    m.dsc += r.dsc;
    m.sen += r.sen;
    m.ppv += r.ppv;
    m.tir += r.tir;
    m.tla += r.tla;
    m.tsa += r.tsa;
  }
  const double n = static_cast<double>(reports.size());
  for (double* v : {&m.oa, &m.dsc, &m.sen, &m.ppv, &m.tir, &m.tla, &m.tsa}) *v /= n;
  m.score = (m.tla + m.tsa + m.tir) / 3.0;
  return m;
}

namespace {

struct Field {
  const char* key;
  double value;
};

std::vector<Field> fields(const MetricsReport& r) {
  return {{"oa", r.oa},   {"dsc", r.dsc}, {"sen", r.sen}, {"ppv", r.ppv},
          {"tir", r.tir}, {"tla", r.tla}, {"tsa", r.tsa}, {"score", r.score}};
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_flat(const MetricsReport& r) {
  std::string out = std::string(kReportHeader) + "\n";
  for (const auto& f : fields(r)) out += std::string(f.key) + "=" + percent(f.value) + "\n";
  return out;
}

std::string format_table(const MetricsReport& r) {
  std::string out = std::string(kReportHeader) + "\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-8s %8s\n", "metric", "value");
  out += buf;
  for (const auto& f : fields(r)) {
    std::string key = f.key;
    std::transform(key.begin(), key.end(), key.begin(), ::toupper);
    std::snprintf(buf, sizeof buf, "%-8s %8s\n", key.c_str(), percent(f.value).c_str());
    out += buf;
  }
  return out;
}

}  // namespace tcat::metrics
