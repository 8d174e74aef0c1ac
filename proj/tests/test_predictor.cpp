#include "invaria/geometry.hpp"
#include "invaria/predictor.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

using namespace invaria;
using invaria::testing::random_cloud;

namespace {

nn::FeatureMap feature_map(ad::Tape& tape, const PointCloud& pc, double grid) {
  return nn::FeatureMap{std::make_shared<const Coords>(pc.coords), tape.constant(pc.feats), grid};
}

}  // namespace

TEST(Densify, TargetIsReturnedVerbatim) {
  const PointCloud dense = random_cloud(50, 1);
  const PointCloud sparse = subsample(dense, 20, 2);
  EXPECT_EQ(densify_coords(sparse.coords, &dense.coords, std::nullopt, 0), dense.coords);
  EXPECT_EQ(densify_coords(sparse.coords, &sparse.coords, std::nullopt, 0), sparse.coords);
}

TEST(Densify, TargetMustContainSparsePoints) {
  const PointCloud a = random_cloud(10, 1);
  const PointCloud b = random_cloud(10, 2);
  EXPECT_THROW(densify_coords(a.coords, &b.coords, std::nullopt, 0), std::invalid_argument);
  EXPECT_THROW(densify_coords(a.coords, nullptr, std::nullopt, 0), std::invalid_argument);
  EXPECT_THROW(densify_coords(a.coords, &a.coords, 2.0, 0), std::invalid_argument);
}

TEST(Densify, RatioCountAndPrefix) {
  const PointCloud pc = random_cloud(37, 3);
  const Coords out = densify_coords(pc.coords, nullptr, 2.0, 5);
  ASSERT_EQ(out.rows(), 74);
  EXPECT_EQ(out.topRows(37), pc.coords);
  EXPECT_EQ(densify_coords(pc.coords, nullptr, 1.5, 5).rows(), 37 + 19);
  EXPECT_THROW(densify_coords(pc.coords, nullptr, 1.0, 5), std::invalid_argument);
}

TEST(Densify, MidpointsLieOnNeighborSegments) {
  const PointCloud pc = random_cloud(60, 4);
  const Coords out = densify_coords(pc.coords, nullptr, 3.0, 7);
  const auto nn3 = knn(pc.coords, pc.coords, 4);
  for (Index m = pc.size(); m < out.rows(); ++m) {
    const Eigen::Vector3d mid = out.row(m).transpose();
    bool found = false;
    for (Index a = 0; a < pc.size() && !found; ++a) {
      for (int j = 1; j < 4 && !found; ++j) {
        const Eigen::Vector3d pa = pc.coords.row(a).transpose();
        const Eigen::Vector3d pb = pc.coords.row(nn3.index(a, j)).transpose();
        if ((mid - pa).cross(pb - pa).norm() < 1e-9 && (mid - 0.5 * (pa + pb)).norm() < 1e-12) found = true;
      }
    }
    EXPECT_TRUE(found) << "point " << m;
  }
}

TEST(InitFeatures, MatchesBruteForceNearest) {
  const PointCloud sparse = random_cloud(30, 5);
  const PointCloud dense = random_cloud(100, 6);
  ad::Tape tape(false);
  const nn::FeatureMap out =
      init_features_nn(feature_map(tape, sparse, 0.1), std::make_shared<const Coords>(dense.coords), 0.05);
  for (Index q = 0; q < dense.size(); ++q) {
    const int j = invaria::testing::brute_nearest(dense.coords, q, sparse.coords);
    EXPECT_EQ(out.feats.value().row(q), sparse.feats.row(j));
  }
  EXPECT_EQ(out.stage_grid, 0.05);
}

TEST(InitFeatures, SingleSparsePoint) {
  const PointCloud sparse = random_cloud(1, 7);
  const PointCloud dense = random_cloud(9, 8);
  ad::Tape tape(false);
  const auto out = init_features_nn(feature_map(tape, sparse, 0.1), std::make_shared<const Coords>(dense.coords), 0.1);
  for (Index q = 0; q < 9; ++q) EXPECT_EQ(out.feats.value().row(q), sparse.feats.row(0));
}

TEST(Refine, ZeroInitIsIdentity) {
  nn::ParameterStore store;
  std::mt19937_64 rng(1);
  PredictorConfig cfg;
  cfg.channels = 4;
  const Predictor phi(store, cfg, rng);
  const PointCloud pc = random_cloud(80, 9);
  ad::Tape tape(false);
  const nn::FeatureMap fm = feature_map(tape, pc, 0.1);
  const nn::FeatureMap out = phi.refine(tape, fm);
  EXPECT_EQ(out.feats.value(), pc.feats);
  EXPECT_EQ(*out.coords, pc.coords);
}

TEST(Refine, SupersetPointsKeepFeaturesAtInit) {
  nn::ParameterStore store;
  std::mt19937_64 rng(2);
  PredictorConfig cfg;
  cfg.channels = 4;
  const Predictor phi(store, cfg, rng);
  const PointCloud dense = random_cloud(120, 10);
  std::vector<int> idx(40);
  for (int i = 0; i < 40; ++i) idx[static_cast<std::size_t>(i)] = 3 * i;
  const PointCloud sparse = dense.select(idx);
  ad::Tape tape(false);
  const auto out = phi.predict_next_resolution(tape, feature_map(tape, sparse, 0.1),
                                               std::make_shared<const Coords>(dense.coords), 0.05);
  ASSERT_EQ(out.size(), 120);
  for (int i = 0; i < 40; ++i) EXPECT_EQ(out.feats.value().row(3 * i), sparse.feats.row(i));
}

TEST(Refine, GradientsMatchFiniteDifferences) {
  nn::ParameterStore store;
  std::mt19937_64 rng(3);
  PredictorConfig cfg;
  cfg.channels = 4;
  cfg.refine_k = 5;
  const Predictor phi(store, cfg, rng);
  // Move away from the zero-initialized output projection so every path carries gradient.
  std::normal_distribution<double> n(0.0, 0.5);
  for (ad::Parameter& p : store.all()) {
    if (p.name.find("fc2") != std::string::npos) {
      for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = n(rng);
    }
  }
  const PointCloud pc = random_cloud(25, 11);
  const Matrix w = random_cloud(4, 12, 25).feats;  // 4 x 25
  const auto scalar = [&](ad::Tape& tape) {
    const ad::Var out = phi.refine(tape, feature_map(tape, pc, 0.2)).feats;  // 25 x 4
    ad::Var acc = ad::matmul(ad::matmul(tape.constant(w.row(0)), out), tape.constant(Matrix::Ones(4, 1)));
    return acc;
  };
  for (ad::Parameter& p : store.all()) {
    store.zero_grad();
    {
      ad::Tape tape;
      tape.backward(scalar(tape));
    }
    const Matrix num = invaria::testing::numeric_gradient(
        [&] {
          ad::Tape tape(false);
          return scalar(tape).scalar();
        },
        p.value);
    EXPECT_LT(invaria::testing::relative_error(p.grad, num), 1e-3) << p.name;
  }
}
