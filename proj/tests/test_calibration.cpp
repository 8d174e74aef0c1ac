#include "invaria/calibration.hpp"
#include "invaria/geometry.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace invaria;

namespace {

double reduce(std::vector<double> d, Reduction r) {
  std::sort(d.begin(), d.end());
  if (r == Reduction::kMin) return d.front();
  if (r == Reduction::kMean) return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
  const std::size_t n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

Coords lattice(int n, double s) {
  Coords c(n * n * n, 3);
  Index r = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) c.row(r++) << i * s, j * s, k * s;
  return c;
}

}  // namespace

TEST(Calibration, LatticeGivesSpacing) {
  for (const Reduction r : {Reduction::kMean, Reduction::kMin, Reduction::kMedian}) {
    EXPECT_NEAR(calibrate_grid_size(lattice(5, 0.03), CalibrationConfig::all_points(1.0, r)), 0.03, 1e-15);
  }
  EXPECT_NEAR(calibrate_grid_size(lattice(4, 0.5), CalibrationConfig::all_points(2.0)), 1.0, 1e-15);
}

TEST(Calibration, MatchesExhaustiveOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PointCloud pc = invaria::testing::random_cloud(50 + 30 * static_cast<Index>(seed), seed);
    const auto d = invaria::testing::exhaustive_nearest_distinct(pc.coords);
    for (const Reduction r : {Reduction::kMean, Reduction::kMin, Reduction::kMedian}) {
      const double expected = 1.5 * reduce(d, r);
      const double got = calibrate_grid_size(pc.coords, CalibrationConfig::all_points(1.5, r));
      EXPECT_NEAR(got, expected, 1e-9 * expected);
    }
  }
}

TEST(Calibration, ScaleEquivariant) {
  const PointCloud pc = invaria::testing::random_cloud(300, 12);
  CalibrationConfig cfg;
  cfg.anchors = 100;
  cfg.seed = 4;
  const double base = calibrate_grid_size(pc.coords, cfg);
  for (const double s : {1.0 / 3.0, 0.5, 2.0, 3.0}) {
    EXPECT_NEAR(calibrate_grid_size(apply_scale(pc, s).coords, cfg), s * base, 1e-9 * s * base);
  }
}

TEST(Calibration, AnchorSubsetUsesSampledPoints) {
  const PointCloud pc = invaria::testing::random_cloud(200, 5);
  CalibrationConfig cfg;
  cfg.anchors = 20;
  cfg.seed = 1;
  const CalibrationResult r = calibrate(pc.coords, cfg);
  ASSERT_EQ(r.anchors.size(), 20u);
  EXPECT_EQ(r.anchors, sample_indices(200, 20, 1));
  const auto all = invaria::testing::exhaustive_nearest_distinct(pc.coords);
  for (std::size_t i = 0; i < r.anchors.size(); ++i) {
    EXPECT_NEAR(r.distances[i], all[static_cast<std::size_t>(r.anchors[i])], 1e-12);
  }
}

TEST(Calibration, Errors) {
  EXPECT_THROW(calibrate(Coords::Zero(1, 3), CalibrationConfig{}), std::invalid_argument);
  EXPECT_THROW(calibrate(Coords::Zero(5, 3), CalibrationConfig{}), DegenerateGeometry);
  EXPECT_THROW(calibrate(lattice(2, 1.0), CalibrationConfig::all_points(0.0)), std::invalid_argument);
  EXPECT_THROW(parse_reduction("max"), std::invalid_argument);
}

TEST(Calibration, StageGridsDouble) {
  EXPECT_EQ(stage_grid_sizes(0.02, 4), (std::vector<double>{0.02, 0.04, 0.08, 0.16}));
  EXPECT_THROW(stage_grid_sizes(0.0, 2), std::invalid_argument);
}
