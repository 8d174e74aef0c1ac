#pragma once

#include "invaria/types.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace invaria {

enum SceneClass : int { kFloor = 0, kWall = 1, kTable = 2, kChair = 3, kClutter = 4 };
inline constexpr int kSceneClasses = 5;

struct SceneSpec {
  double size_x = 1.6;  // room footprint, meters
  double size_y = 1.6;
  double wall_height = 0.8;
  int tables = 1;
  int chairs = 2;
  int clutter = 4;
  double density = 8000.0;  // surface samples per square meter
  double color_noise = 0.03;
  Index min_points = 50000;

  void validate() const;
};

/// A planar rectangle origin + a*edge_u + b*edge_v, a, b in [0, 1].
struct SurfacePatch {
  int label = 0;
  Eigen::Vector3d tint;  // per-object base color
  Eigen::Vector3d origin;  // a corner of the rectangle
  Eigen::Vector3d edge_u;
  Eigen::Vector3d edge_v;
  Eigen::Vector3d normal;
  double area() const { return edge_u.cross(edge_v).norm(); }
};

/// Every sampled rectangle of the room described by (seed, spec).
std::vector<SurfacePatch> scene_patches(std::uint64_t seed, const SceneSpec& spec);

/// Dense labeled surface sampling of a synthetic room. Features are a
/// normal-shaded pseudo-color (3) plus height (1); values are rounded to float32.
PointCloud generate_scene(std::uint64_t seed, const SceneSpec& spec = {});

struct ManifestEntry {
  std::filesystem::path path;
  bool train = true;
};

/// One "path split" line per cloud, split in {train, val}; relative paths are
/// resolved against the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);
void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries);

}  // namespace invaria
