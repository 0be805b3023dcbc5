#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tcat/geom/geom.hpp"

// Point-wise and instance-level segmentation metrics. All values are in
// [0,1]; label 0 is gingiva and never counts as a tooth class.
namespace tcat::metrics {

using Confusion = std::vector<std::vector<std::size_t>>;  // [gt][pred]

struct ToothInstance {
  int id = 0;
  int label = 0;  // ground-truth class of the first member
  std::vector<std::size_t> members;
  geom::Point3 centroid{};
  double bbox_diagonal = 0.0;
};

/// One entry per instance id > 0, ascending by id.
std::vector<ToothInstance> extract_instances(const geom::Coords& points,
                                             std::span<const int> labels,
                                             std::span<const int> instances);

Confusion confusion(std::span<const int> pred, std::span<const int> gt, std::size_t n_classes);

struct PointMetrics {
  double oa = 0.0;
  double dsc = 0.0;
  double sen = 0.0;
  double ppv = 0.0;
};

/// Macro averages run over tooth classes present in the ground truth. With
/// no such class they are vacuously 1.
PointMetrics point_metrics(const Confusion& conf);

double identification_rate(std::span<const int> pred, const std::vector<ToothInstance>& gt);
double localization_accuracy(const geom::Coords& tcp, const std::vector<ToothInstance>& gt);
double segmentation_accuracy(std::span<const int> pred, std::span<const int> gt,
                             const std::vector<ToothInstance>& instances);

struct MetricsReport {
  double oa = 0.0;
  double dsc = 0.0;
  double sen = 0.0;
  double ppv = 0.0;
  double tir = 0.0;
  double tla = 0.0;
  double tsa = 0.0;
  double score = 0.0;
};

struct EvalInput {
  geom::Coords points;  // frame shared with `tcp`
  std::vector<int> gt_labels;
  std::vector<int> gt_instances;
  std::vector<int> pred_labels;
  geom::Coords tcp;
  std::size_t n_classes = 0;
};

MetricsReport evaluate(const EvalInput& in);

/// Field-wise arithmetic mean; score is recomputed from the averaged parts.
MetricsReport mean_report(std::span<const MetricsReport> reports);

/// `key=value` lines, values x100 with two decimals.
std::string format_flat(const MetricsReport& r);
/// Aligned two-column table, values x100 with two decimals.
std::string format_table(const MetricsReport& r);

inline constexpr const char* kReportHeader = "# artifact-defined metric variants";

}  // namespace tcat::metrics
