#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tcat/errors.hpp"
#include "tcat/metrics/metrics.hpp"

using namespace tcat;
using namespace tcat::metrics;

namespace {

// Two teeth along x plus gingiva. Tooth 1 spans x in [0,1], tooth 2 spans [3,4].
struct Scene {
  geom::Coords points{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {3, 0, 0}, {4, 0, 0},
                      {4, 1, 0}, {9, 9, 9}, {8, 9, 9}};
  std::vector<int> labels{1, 1, 1, 2, 2, 2, 0, 0};
  std::vector<int> instances{1, 1, 1, 2, 2, 2, 0, 0};
  std::vector<ToothInstance> teeth() const { return extract_instances(points, labels, instances); }
};

}  // namespace

TEST(Confusion, HandTalliedFivePoints) {
  const std::vector<int> gt{0, 1, 1, 2, 2};
  const std::vector<int> pred{0, 1, 2, 2, 0};
  const Confusion c = confusion(pred, gt, 3);
  EXPECT_EQ(c, (Confusion{{1, 0, 0}, {0, 1, 1}, {1, 0, 1}}));
  const PointMetrics m = point_metrics(c);
  EXPECT_DOUBLE_EQ(m.oa, 3.0 / 5.0);
  // Class 1: TP 1, FN 1, FP 0. Class 2: TP 1, FN 1, FP 1.
  EXPECT_DOUBLE_EQ(m.sen, 0.5);
  EXPECT_DOUBLE_EQ(m.ppv, (1.0 + 0.5) / 2.0);
  EXPECT_DOUBLE_EQ(m.dsc, (2.0 / 3.0 + 0.5) / 2.0);
}

TEST(Confusion, PerfectAndConstantPredictions) {
  const std::vector<int> gt{0, 2, 1, 1, 2};
  EXPECT_EQ(confusion(gt, gt, 3), (Confusion{{1, 0, 0}, {0, 2, 0}, {0, 0, 2}}));
  const std::vector<int> zeros(5, 0);
  EXPECT_EQ(confusion(zeros, gt, 3), (Confusion{{1, 0, 0}, {2, 0, 0}, {2, 0, 0}}));
  const std::vector<int> bad{0, 3, 1, 1, 2};
  EXPECT_THROW(confusion(bad, gt, 3), ValidationError);
  EXPECT_THROW(confusion(std::vector<int>{0}, gt, 3), SizeError);
}

TEST(PointMetrics, PerfectAndComplement) {
  const std::vector<int> gt{1, 1, 2, 2};
  const PointMetrics perfect = point_metrics(confusion(gt, gt, 3));
  EXPECT_EQ(perfect.oa, 1.0);
  EXPECT_EQ(perfect.dsc, 1.0);
  EXPECT_EQ(perfect.sen, 1.0);
  EXPECT_EQ(perfect.ppv, 1.0);
  const std::vector<int> swapped{2, 2, 1, 1};
  const PointMetrics miss = point_metrics(confusion(swapped, gt, 3));
  EXPECT_EQ(miss.oa, 0.0);
  EXPECT_EQ(miss.dsc, 0.0);
}

TEST(Instances, ExtractedAscendingWithGeometry) {
  const Scene s;
  const auto t = s.teeth();
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].id, 1);
  EXPECT_EQ(t[1].label, 2);
  EXPECT_EQ(t[0].members, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_NEAR(t[0].centroid[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(t[0].bbox_diagonal, std::sqrt(2.0), 1e-15);
}

TEST(Identification, MajorityRule) {
  const Scene s;
  EXPECT_EQ(identification_rate(s.labels, s.teeth()), 1.0);
  std::vector<int> one_wrong = s.labels;
  for (int i : {3, 4, 5}) one_wrong[i] = 5;
  EXPECT_EQ(identification_rate(one_wrong, s.teeth()), 0.5);

  // Five-point tooth with 3 correct and 2 wrong is still identified.
  const geom::Coords pts(5, geom::Point3{0, 0, 0});
  const std::vector<int> gt(5, 4), inst(5, 1);
  const std::vector<int> pred{4, 4, 4, 7, 7};
  EXPECT_EQ(identification_rate(pred, extract_instances(pts, gt, inst)), 1.0);
  const std::vector<int> tie{4, 4, 3, 3, 9};
  EXPECT_EQ(identification_rate(tie, extract_instances(pts, gt, inst)), 0.0);
}

TEST(Localization, ClampFormula) {
  const Scene s;
  const auto t = s.teeth();
  geom::Coords exact{t[0].centroid, t[1].centroid, {50, 50, 50}};
  EXPECT_EQ(localization_accuracy(exact, t), 1.0);

  auto shifted = [&](double fraction) {
    geom::Coords out;
    for (const auto& inst : t) {
      geom::Point3 p = inst.centroid;
      p[2] += fraction * inst.bbox_diagonal;
      out.push_back(p);
    }
    return out;
  };
  EXPECT_NEAR(localization_accuracy(shifted(1.0), t), 0.0, 1e-15);
  EXPECT_NEAR(localization_accuracy(shifted(0.5), t), 0.5, 1e-15);
  EXPECT_EQ(localization_accuracy(shifted(3.0), t), 0.0);
  EXPECT_THROW(localization_accuracy({t[0].centroid}, t), ValidationError);
  EXPECT_THROW(localization_accuracy(exact, {}), ValidationError);
}

TEST(Segmentation, ToothPointsOnly) {
  const Scene s;
  EXPECT_EQ(segmentation_accuracy(s.labels, s.labels, s.teeth()), 1.0);
  std::vector<int> gum(s.labels.size(), 0);
  EXPECT_EQ(segmentation_accuracy(gum, s.labels, s.teeth()), 0.0);
  std::vector<int> half = s.labels;
  for (int i : {0, 1, 3}) half[i] = 0;
  EXPECT_EQ(segmentation_accuracy(half, s.labels, s.teeth()), 0.5);
}

TEST(Evaluate, GroundTruthScoresOneEverywhere) {
  const Scene s;
  EvalInput in{s.points, s.labels, s.instances, s.labels, {}, 3};
  for (const auto& t : s.teeth()) in.tcp.push_back(t.centroid);
  const MetricsReport r = evaluate(in);
  for (double v : {r.oa, r.dsc, r.sen, r.ppv, r.tir, r.tla, r.tsa, r.score}) EXPECT_EQ(v, 1.0);
}

TEST(Evaluate, BoundsScoreAndPermutation) {
  const Scene s;
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> lab(0, 2);
  std::uniform_real_distribution<double> u(-1, 5);
  for (int trial = 0; trial < 20; ++trial) {
    EvalInput in{s.points, s.labels, s.instances, {}, {}, 3};
    for (std::size_t i = 0; i < s.points.size(); ++i) in.pred_labels.push_back(lab(rng));
    for (int m = 0; m < 4; ++m) in.tcp.push_back({u(rng), u(rng), 0.0});
    const MetricsReport r = evaluate(in);
    for (double v : {r.oa, r.dsc, r.sen, r.ppv, r.tir, r.tla, r.tsa, r.score}) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(r.score, (r.tla + r.tsa + r.tir) / 3.0, 1e-12);
    if (r.tsa == 1.0) EXPECT_EQ(r.tir, 1.0);

    EvalInput p = in;
    std::vector<std::size_t> order(s.points.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      p.points[i] = in.points[order[i]];
      p.gt_labels[i] = in.gt_labels[order[i]];
      p.gt_instances[i] = in.gt_instances[order[i]];
      p.pred_labels[i] = in.pred_labels[order[i]];
    }
    const MetricsReport q = evaluate(p);
    EXPECT_EQ(q.oa, r.oa);
    EXPECT_EQ(q.dsc, r.dsc);
    EXPECT_EQ(q.tir, r.tir);
    EXPECT_EQ(q.tsa, r.tsa);
    EXPECT_NEAR(q.tla, r.tla, 1e-12);
  }
}

TEST(Report, FormattingAndMean) {
  MetricsReport a;
  a.oa = 1.0;
  a.tir = 0.5;
  MetricsReport b;
  b.oa = 0.5;
  b.tla = 0.25;
  const std::vector<MetricsReport> both{a, b};
  const MetricsReport m = mean_report(both);
  EXPECT_EQ(m.oa, 0.75);
  EXPECT_EQ(m.score, (m.tla + m.tsa + m.tir) / 3.0);
  const std::string flat = format_flat(m);
  EXPECT_NE(flat.find("oa=75.00"), std::string::npos) << flat;
  EXPECT_NE(format_table(m).find("75.00"), std::string::npos);
}
