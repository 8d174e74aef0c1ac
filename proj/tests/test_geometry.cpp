#include "invaria/geometry.hpp"
#include "invaria/kernels.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>
#include <tuple>

using namespace invaria;
using invaria::testing::random_cloud;

TEST(Voxelize, CellCountMatchesDistinctKeys) {
  const PointCloud pc = random_cloud(2000, 3);
  for (const double g : {0.05, 0.1, 0.37}) {
    std::set<std::tuple<long, long, long>> keys;
    for (Index i = 0; i < pc.size(); ++i) {
      keys.emplace(static_cast<long>(std::floor(pc.coords(i, 0) / g)), static_cast<long>(std::floor(pc.coords(i, 1) / g)),
                   static_cast<long>(std::floor(pc.coords(i, 2) / g)));
    }
    const VoxelizationResult v = voxelize(pc, g);
    EXPECT_EQ(v.pooled.size(), static_cast<Index>(keys.size()));
    EXPECT_EQ(v.inverse_index.size(), static_cast<std::size_t>(pc.size()));
  }
}

TEST(Voxelize, MeansAndMajorityLabel) {
  PointCloud pc;
  pc.coords.resize(4, 3);
  pc.coords << 0.01, 0.01, 0.01,  //
      0.03, 0.01, 0.01,           //
      0.02, 0.02, 0.02,           //
      0.5, 0.5, 0.5;
  pc.feats.resize(4, 1);
  pc.feats << 1, 2, 3, 7;
  pc.labels = {2, 1, 1, 4};
  const VoxelizationResult v = voxelize(pc, 0.1);
  ASSERT_EQ(v.pooled.size(), 2);
  EXPECT_NEAR(v.pooled.coords(0, 0), 0.02, 1e-15);
  EXPECT_DOUBLE_EQ(v.pooled.feats(0, 0), 2.0);
  EXPECT_EQ(v.pooled.labels[0], 1);
  EXPECT_EQ(v.pooled.labels[1], 4);
  EXPECT_EQ(v.inverse_index, (std::vector<int>{0, 0, 0, 1}));
}

TEST(Voxelize, TieGoesToSmallestLabel) {
  PointCloud pc;
  pc.coords = Coords::Zero(2, 3);
  pc.feats = Matrix::Zero(2, 1);
  pc.labels = {3, 1};
  EXPECT_EQ(voxelize(pc, 1.0).pooled.labels[0], 1);
}

TEST(Voxelize, RejectsBadInput) {
  const PointCloud pc = random_cloud(10, 1);
  EXPECT_THROW(voxelize(pc, 0.0), std::invalid_argument);
  EXPECT_THROW(voxelize(PointCloud{}, 0.1), std::invalid_argument);
}

TEST(Sampling, DistinctAndDeterministic) {
  const auto a = sample_indices(1000, 300, 9);
  const auto b = sample_indices(1000, 300, 9);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 300u);
  EXPECT_NE(a, sample_indices(1000, 300, 10));
  EXPECT_THROW(sample_indices(10, 11, 0), std::invalid_argument);
  EXPECT_THROW(sample_indices(10, 0, 0), std::invalid_argument);
}

TEST(Pyramid, CardinalitiesAndNesting) {
  const PointCloud pc = random_cloud(5000, 4);
  const ResolutionPyramid pyr = build_pyramid(pc, 64, 4, 1);
  EXPECT_EQ(pyr.cardinalities, (std::vector<Index>{64, 256, 1024, 4096}));
  ASSERT_EQ(pyr.depth(), 4);
  for (int m = 0; m + 1 < pyr.depth(); ++m) {
    std::set<std::tuple<double, double, double>> finer;
    const Coords& f = pyr.levels[static_cast<std::size_t>(m + 1)].coords;
    for (Index i = 0; i < f.rows(); ++i) finer.emplace(f(i, 0), f(i, 1), f(i, 2));
    const Coords& c = pyr.levels[static_cast<std::size_t>(m)].coords;
    for (Index i = 0; i < c.rows(); ++i) EXPECT_TRUE(finer.count({c(i, 0), c(i, 1), c(i, 2)}));
  }
  EXPECT_THROW(build_pyramid(pc, 5000, 4, 0), std::invalid_argument);
  EXPECT_THROW(build_pyramid(pc, 64, 1, 0), std::invalid_argument);
}

TEST(Scale, CoordinatesOnly) {
  const PointCloud pc = random_cloud(50, 2);
  const PointCloud s = apply_scale(pc, 3.0);
  EXPECT_TRUE(s.coords.isApprox(pc.coords * 3.0));
  EXPECT_EQ(s.feats, pc.feats);
  EXPECT_EQ(s.labels, pc.labels);
  EXPECT_THROW(apply_scale(pc, 0.0), std::invalid_argument);
}

TEST(Knn, ParallelMatchesSerialAndBruteForce) {
  const PointCloud refs = random_cloud(700, 5);
  const PointCloud queries = random_cloud(120, 6);
  for (const int k : {1, 5, 16}) {
    const auto s = kernels::knn_serial(queries.coords, refs.coords, k);
    const auto p = kernels::knn_parallel(queries.coords, refs.coords, k);
    EXPECT_EQ(s.indices, p.indices);
    EXPECT_EQ(s.distances, p.distances);
    for (Index q = 0; q < queries.size(); ++q) {
      std::vector<std::pair<double, int>> all;
      for (Index j = 0; j < refs.size(); ++j) {
        all.emplace_back(invaria::testing::dist2(queries.coords, q, refs.coords, j), static_cast<int>(j));
      }
      std::sort(all.begin(), all.end());
      for (int j = 0; j < k; ++j) ASSERT_EQ(p.index(q, j), all[static_cast<std::size_t>(j)].second);
    }
  }
}

TEST(Knn, DuplicatePointsBreakTiesByIndex) {
  Coords c = Coords::Zero(5, 3);
  c(4, 0) = 1.0;
  const auto t = kernels::knn_parallel(c, c, 4);
  EXPECT_EQ(t.index(2, 0), 0);
  EXPECT_EQ(t.index(2, 1), 1);
  EXPECT_EQ(t.index(2, 2), 2);
  EXPECT_EQ(t.index(2, 3), 3);
}

TEST(NearestDistinct, ParallelMatchesSerialAndOracle) {
  const PointCloud pc = random_cloud(400, 8);
  std::vector<int> anchors(static_cast<std::size_t>(pc.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i) anchors[i] = static_cast<int>(i);
  const auto s = kernels::nearest_distinct_serial(pc.coords, anchors);
  const auto p = kernels::nearest_distinct_parallel(pc.coords, anchors);
  const auto oracle = invaria::testing::exhaustive_nearest_distinct(pc.coords);
  EXPECT_EQ(s, p);
  for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(p[i], oracle[i], 1e-12 * oracle[i]);
}

TEST(EdgeMax, ParallelMatchesSerial) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  const Index p = 200, h = 7;
  const int k = 5;
  Matrix u(p, h), rel(p * k, 3), w(3, h), b(1, h);
  for (Matrix* m : {&u, &rel, &w, &b}) {
    for (Index i = 0; i < m->size(); ++i) m->data()[i] = n(rng);
  }
  std::vector<int> nbr(static_cast<std::size_t>(p * k));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(p) - 1);
  for (int& x : nbr) x = pick(rng);
  const auto s = kernels::edge_max_relu_serial(u, nbr, k, rel, w, b);
  const auto q = kernels::edge_max_relu_parallel(u, nbr, k, rel, w, b);
  EXPECT_EQ(s.out, q.out);
  EXPECT_EQ(s.argmax, q.argmax);
  // Direct evaluation of one entry.
  double best = 0.0;
  for (int j = 0; j < k; ++j) {
    const int src = nbr[static_cast<std::size_t>(3 * k + j)];
    best = std::max(best, u(src, 2) + rel.row(3 * k + j).dot(w.col(2)) + b(0, 2));
  }
  EXPECT_NEAR(q.out(3, 2), best, 1e-12);
}
