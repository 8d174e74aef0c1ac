#include "invaria/scene.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <set>

using namespace invaria;

TEST(Scene, DeterministicForSeed) {
  const PointCloud a = generate_scene(4);
  const PointCloud b = generate_scene(4);
  EXPECT_EQ(a.coords, b.coords);
  EXPECT_EQ(a.feats, b.feats);
  EXPECT_EQ(a.labels, b.labels);
  EXPECT_NE(generate_scene(5).coords.rows(), 0);
}

TEST(Scene, DefaultMeetsMinimumAndHasSeveralClasses) {
  const PointCloud pc = generate_scene(1);
  EXPECT_GE(pc.size(), 50000);
  const std::set<int> classes(pc.labels.begin(), pc.labels.end());
  EXPECT_EQ(classes.size(), 5u);
  EXPECT_EQ(pc.feature_dim(), 4);
  pc.validate(kSceneClasses);
}

TEST(Scene, EmptyRoomHasOnlyFloorAndWalls) {
  SceneSpec spec;
  spec.tables = spec.chairs = spec.clutter = 0;
  spec.min_points = 0;
  const PointCloud pc = generate_scene(2, spec);
  const std::set<int> classes(pc.labels.begin(), pc.labels.end());
  EXPECT_EQ(classes, (std::set<int>{kFloor, kWall}));
}

TEST(Scene, ClassHistogramFollowsSurfaceArea) {
  const SceneSpec spec;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::vector<double> area(kSceneClasses, 0.0);
    for (const SurfacePatch& p : scene_patches(seed, spec)) {
      // Analytic rectangle area |u| |v| for axis-aligned edges.
      area[static_cast<std::size_t>(p.label)] += p.edge_u.norm() * p.edge_v.norm();
    }
    const PointCloud pc = generate_scene(seed, spec);
    std::vector<double> count(kSceneClasses, 0.0);
    for (const int l : pc.labels) count[static_cast<std::size_t>(l)] += 1.0;
    double total_area = 0.0;
    for (const double a : area) total_area += a;
    for (int c = 0; c < kSceneClasses; ++c) {
      const double expected = area[static_cast<std::size_t>(c)] / total_area;
      const double got = count[static_cast<std::size_t>(c)] / static_cast<double>(pc.size());
      EXPECT_NEAR(got, expected, 0.1 * expected) << "class " << c;
    }
  }
}

TEST(Scene, RejectsDegenerateSpec) {
  SceneSpec spec;
  spec.size_x = 0.0;
  EXPECT_THROW(generate_scene(0, spec), std::invalid_argument);
  spec = SceneSpec{};
  spec.density = 10.0;
  EXPECT_THROW(generate_scene(0, spec), std::invalid_argument);
}

TEST(Manifest, RoundTripAndRelativePaths) {
  const auto dir = std::filesystem::temp_directory_path() / "invaria_manifest";
  std::filesystem::remove_all(dir);
  write_manifest(dir / "m.txt", {{"a.pts", true}, {"sub/b.pts", false}});
  const auto entries = read_manifest(dir / "m.txt");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].path, dir / "a.pts");
  EXPECT_TRUE(entries[0].train);
  EXPECT_EQ(entries[1].path, dir / "sub/b.pts");
  EXPECT_FALSE(entries[1].train);
  write_manifest(dir / "bad.txt", {});
  EXPECT_THROW(read_manifest(dir / "bad.txt"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}
