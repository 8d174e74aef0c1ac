#include "invaria/evaluation.hpp"
#include "invaria/geometry.hpp"
#include "invaria/inference.hpp"
#include "invaria/scene.hpp"
#include "reference_tables.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace invaria;

namespace {

ModelConfig tiny_model(bool nrp = true) {
  ModelConfig mc;
  mc.backbone.enc_channels = {8, 16};
  mc.backbone.enc_depths = {1, 1};
  mc.backbone.dec_depths = {1};
  mc.backbone.dec_channels = {8};
  mc.backbone.out_dim = 8;
  mc.backbone.k_neighbors = 8;
  mc.use_nrp = nrp;
  mc.calibration.anchors = 128;
  return mc;
}

PointCloud small_scene(std::uint64_t seed) {
  SceneSpec spec;
  spec.density = 600.0;
  spec.min_points = 0;
  return generate_scene(seed, spec);
}

}  // namespace

TEST(Reach, ScalingLaws) {
  for (const double tau : {0.01, 0.02, 0.5}) {
    for (const int k : {1, 8, 16, 27}) {
      EXPECT_EQ(reach(2 * tau, k), 2 * reach(tau, k));
      EXPECT_EQ(reach(tau, 8 * k), 2 * reach(tau, k));
    }
  }
  EXPECT_NEAR(reach(1.0, 27), 3.0, 1e-15);
  EXPECT_THROW(reach(0.0, 4), std::invalid_argument);
  EXPECT_THROW(reach(1.0, 0), std::invalid_argument);
}

TEST(ProjectLabels, CopiesAndMatchesBruteForce) {
  const PointCloud src = invaria::testing::random_cloud(80, 1);
  EXPECT_EQ(project_labels(src, src.coords), src.labels);
  const PointCloud tgt = invaria::testing::random_cloud(200, 2);
  const auto labels = project_labels(src, tgt.coords);
  for (Index q = 0; q < tgt.size(); ++q) {
    EXPECT_EQ(labels[static_cast<std::size_t>(q)],
              src.labels[static_cast<std::size_t>(invaria::testing::brute_nearest(tgt.coords, q, src.coords))]);
  }
  const PointCloud one = invaria::testing::random_cloud(1, 3);
  for (const int l : project_labels(one, tgt.coords)) EXPECT_EQ(l, one.labels[0]);
}

TEST(Asymmetric, FullFractionEqualsSymmetric) {
  const InvariaModel model(tiny_model());
  const PointCloud pc = voxelize(small_scene(1), 0.05).pooled;
  const AsymmetricResult r = asymmetric_segment(pc, model, 1.0, 3);
  EXPECT_EQ(r.labels, model.predict_labels(pc));
  EXPECT_EQ(r.stats.backbone_points, pc.size());
  EXPECT_EQ(r.stats.token_reduction, 0.0);
}

TEST(Asymmetric, SparseFractionShapeAndStats) {
  const InvariaModel model(tiny_model());
  const PointCloud pc = voxelize(small_scene(2), 0.05).pooled;
  const AsymmetricResult r = asymmetric_segment(pc, model, 0.6, 3);
  EXPECT_EQ(r.labels.size(), static_cast<std::size_t>(pc.size()));
  EXPECT_EQ(r.stats.backbone_points, static_cast<Index>(std::ceil(0.6 * static_cast<double>(pc.size()))));
  EXPECT_NEAR(r.stats.token_reduction, 0.4, 1e-15);
  for (const int l : r.labels) EXPECT_TRUE(l >= 0 && l < 5);
  EXPECT_THROW(asymmetric_segment(pc, model, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(asymmetric_segment(pc, model, 1.5, 0), std::invalid_argument);
}

TEST(Asymmetric, NonNrpModelIsFlagged) {
  const InvariaModel model(tiny_model(false));
  const PointCloud pc = voxelize(small_scene(3), 0.05).pooled;
  const AsymmetricResult r = asymmetric_segment(pc, model, 0.5, 1);
  EXPECT_FALSE(r.stats.model_has_nrp);
  EXPECT_EQ(r.labels.size(), static_cast<std::size_t>(pc.size()));
}

TEST(Metrics, Perfect) {
  const std::vector<int> y{0, 1, 2, 2, 1};
  const Metrics m = confusion_and_metrics(y, y, 3);
  EXPECT_EQ(m.miou, 1.0);
  EXPECT_EQ(m.macc, 1.0);
  EXPECT_EQ(m.allacc, 1.0);
}

TEST(Metrics, HandCountedInstance) {
  const std::vector<int> gt{0, 0, 0, 1, 1, 2, 2, 2, 2, kIgnoreLabel};
  const std::vector<int> pred{0, 1, 0, 1, 2, 2, 2, 0, 2, 1};
  const Metrics m = confusion_and_metrics(pred, gt, 3);
  // class 0: tp 2, fp 1, fn 1 -> 2/4; class 1: tp 1, fp 1, fn 1 -> 1/3; class 2: tp 3, fp 1, fn 1 -> 3/5
  EXPECT_NEAR(m.iou[0], 0.5, 1e-15);
  EXPECT_NEAR(m.iou[1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.iou[2], 0.6, 1e-15);
  EXPECT_NEAR(m.miou, (0.5 + 1.0 / 3.0 + 0.6) / 3.0, 1e-15);
  EXPECT_NEAR(m.macc, (2.0 / 3.0 + 0.5 + 0.75) / 3.0, 1e-15);
  EXPECT_NEAR(m.allacc, 6.0 / 9.0, 1e-15);
}

TEST(Metrics, RandomInstanceAgainstBruteCounts) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(0, 2);
  std::vector<int> gt(10), pred(10);
  for (int i = 0; i < 10; ++i) {
    gt[static_cast<std::size_t>(i)] = d(rng);
    pred[static_cast<std::size_t>(i)] = d(rng);
  }
  const Metrics m = confusion_and_metrics(pred, gt, 3);
  double weighted = 0.0;
  for (int c = 0; c < 3; ++c) {
    int tp = 0, g = 0, p = 0;
    for (int i = 0; i < 10; ++i) {
      tp += gt[static_cast<std::size_t>(i)] == c && pred[static_cast<std::size_t>(i)] == c;
      g += gt[static_cast<std::size_t>(i)] == c;
      p += pred[static_cast<std::size_t>(i)] == c;
    }
    if (g + p - tp > 0) {
      EXPECT_NEAR(m.iou[static_cast<std::size_t>(c)], static_cast<double>(tp) / (g + p - tp), 1e-15);
    }
    if (g > 0) weighted += (g / 10.0) * (static_cast<double>(tp) / g);
  }
  EXPECT_NEAR(m.allacc, weighted, 1e-15);
}

TEST(Metrics, EmptyEvaluation) {
  const std::vector<int> gt{kIgnoreLabel, kIgnoreLabel};
  EXPECT_THROW(confusion_and_metrics(gt, gt, 2), EmptyEvaluation);
}

TEST(Metrics, MergeIsOrderIndependent) {
  ConfusionMatrix a(3), b(3), ab(3), ba(3);
  a.add(std::vector<int>{0, 1, 2}, std::vector<int>{0, 2, 2});
  b.add(std::vector<int>{1, 1}, std::vector<int>{0, 1});
  ab.merge(a);
  ab.merge(b);
  ba.merge(b);
  ba.merge(a);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_EQ(ab.at(i, j), ba.at(i, j));
}

TEST(Metrics, ReferencePerClassMeanAndWallDrop) {
  using namespace invaria::testing;
  EXPECT_NEAR(mean_iou(kReferenceIoUAtTauStar), kReferenceMeanIoUAtTauStar, 0.05);
  const auto drops = per_class_drop(kReferenceIoUAtTauStar, kReferenceIoUAtThreeTauStar);
  ASSERT_TRUE(drops[0].has_value());
  EXPECT_NEAR(-100.0 * *drops[0], kReferenceWallDropPercent, 0.2);
}

TEST(PerClassDrop, HandBuiltReport) {
  ShiftReport r;
  r.settings = {1.0, 3.0};
  Metrics base, worst;
  base.iou = {0.8, 0.0};
  worst.iou = {0.6, 0.0};
  r.rows = {base, worst};
  r.class_names = {"a", "b"};
  const auto d = per_class_drop(r, 1.0, 3.0);
  EXPECT_NEAR(*d[0], 0.25, 1e-15);
  EXPECT_FALSE(d[1].has_value());
  const auto same = per_class_drop(r, 1.0, 1.0);
  EXPECT_EQ(*same[0], 0.0);
  EXPECT_THROW(per_class_drop(r, 1.0, 2.0), std::invalid_argument);
}

TEST(Suites, SettingsRowsAndDeterminism) {
  const InvariaModel model(tiny_model());
  const std::vector<PointCloud> scenes{small_scene(4), small_scene(5)};
  const std::vector<double> mult{0.5, 1, 2, 3};
  const ShiftReport r = resolution_shift_suite(model, scenes, 0.05, mult);
  ASSERT_EQ(r.rows.size(), 4u);
  for (std::size_t i = 0; i < mult.size(); ++i) EXPECT_NEAR(r.settings[i], 0.05 * mult[i], 1e-15);
  const std::vector<double> one{1};
  const ShiftReport again = resolution_shift_suite(model, scenes, 0.05, one);
  EXPECT_EQ(again.rows[0].iou.size(), r.rows[1].iou.size());
  for (std::size_t c = 0; c < again.rows[0].iou.size(); ++c) {
    if (std::isnan(again.rows[0].iou[c])) continue;
    EXPECT_EQ(again.rows[0].iou[c], r.rows[1].iou[c]);
  }
  const std::string csv = report_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "setting,mIoU,mAcc,allAcc,floor,wall,table,chair,clutter");

  const std::vector<double> fr{0.1, 1.0};
  const ShiftReport dens = density_shift_suite(model, scenes, fr, 0.05);
  EXPECT_EQ(dens.rows.size(), 2u);
  const std::vector<double> factors{2.0, 1.0};
  const ShiftReport sc = scale_shift_suite(model, scenes, factors, 0.05);
  EXPECT_EQ(sc.rows.size(), 2u);
  // Fraction 1 and scale 1 score the unperturbed tau-star clouds.
  EXPECT_EQ(dens.rows[1].allacc, sc.rows[1].allacc);
}
