#include "invaria/scene.hpp"

#include "invaria/io.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace invaria {

void SceneSpec::validate() const {
  if (!(size_x > 0.0 && size_y > 0.0 && wall_height > 0.0)) {
    throw std::invalid_argument("scene spec: room extents must be positive");
  }
  if (tables < 0 || chairs < 0 || clutter < 0) throw std::invalid_argument("scene spec: negative object count");
  if ((tables > 0 || chairs > 0) && (size_x < 1.0 || size_y < 1.0)) {
    throw std::invalid_argument("scene spec: furniture needs a footprint of at least 1 x 1 m");
  }
  if (!(density > 0.0)) throw std::invalid_argument("scene spec: density must be positive");
  if (!(color_noise >= 0.0)) throw std::invalid_argument("scene spec: color_noise must be non-negative");
  if (min_points < 0) throw std::invalid_argument("scene spec: min_points must be non-negative");
}

namespace {

using Vec3 = Eigen::Vector3d;

class Builder {
 public:
  explicit Builder(std::vector<SurfacePatch>& out) : out_(out) {}

  void rect(int label, const Vec3& tint, const Vec3& origin, const Vec3& u, const Vec3& v, const Vec3& normal) {
    out_.push_back(SurfacePatch{label, tint, origin, u, v, normal});
  }

  // Axis-aligned box [lo, hi]; `skip_top` / `skip_bottom` drop the faces normal to z.
  void box(int label, const Vec3& tint, const Vec3& lo, const Vec3& hi, bool skip_top, bool skip_bottom) {
    const Vec3 d = hi - lo;
    for (int axis = 0; axis < 3; ++axis) {
      for (int side = 0; side < 2; ++side) {
        if (axis == 2 && side == 1 && skip_top) continue;
        if (axis == 2 && side == 0 && skip_bottom) continue;
        const int a = (axis + 1) % 3;
        const int b = (axis + 2) % 3;
        Vec3 origin = lo;
        origin[axis] = side ? hi[axis] : lo[axis];
        Vec3 u = Vec3::Zero(), v = Vec3::Zero(), n = Vec3::Zero();
        u[a] = d[a];
        v[b] = d[b];
        n[axis] = side ? 1.0 : -1.0;
        rect(label, tint, origin, u, v, n);
      }
    }
  }

 private:
  std::vector<SurfacePatch>& out_;
};

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Vec3 random_tint(std::mt19937_64& rng) { return Vec3(uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8)); }

void legs(Builder& b, int label, const Vec3& tint, double x0, double y0, double x1, double y1, double top,
          double leg) {
  const double xs[2] = {x0, x1 - leg};
  const double ys[2] = {y0, y1 - leg};
  for (const double x : xs) {
    for (const double y : ys) b.box(label, tint, Vec3(x, y, 0.0), Vec3(x + leg, y + leg, top), true, true);
  }
}

}  // namespace

std::vector<SurfacePatch> scene_patches(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<SurfacePatch> patches;
  Builder b(patches);
  const double X = spec.size_x, Y = spec.size_y, H = spec.wall_height;

  b.rect(kFloor, random_tint(rng), Vec3(0, 0, 0), Vec3(X, 0, 0), Vec3(0, Y, 0), Vec3(0, 0, 1));
  const Vec3 wall_tint = random_tint(rng);
  b.rect(kWall, wall_tint, Vec3(0, 0, 0), Vec3(0, Y, 0), Vec3(0, 0, H), Vec3(1, 0, 0));
  b.rect(kWall, wall_tint, Vec3(X, 0, 0), Vec3(0, Y, 0), Vec3(0, 0, H), Vec3(-1, 0, 0));
  b.rect(kWall, wall_tint, Vec3(0, 0, 0), Vec3(X, 0, 0), Vec3(0, 0, H), Vec3(0, 1, 0));
  b.rect(kWall, wall_tint, Vec3(0, Y, 0), Vec3(X, 0, 0), Vec3(0, 0, H), Vec3(0, -1, 0));

  constexpr double margin = 0.08;
  const auto place = [&](double w, double d) {
    const double x = uniform(rng, margin, std::max(margin, X - margin - w));
    const double y = uniform(rng, margin, std::max(margin, Y - margin - d));
    return std::pair{x, y};
  };

  struct Top {
    double x0, y0, x1, y1, z;
  };
  std::vector<Top> tops;
  for (int t = 0; t < spec.tables; ++t) {
    const double w = uniform(rng, 0.5, 0.8), d = uniform(rng, 0.4, 0.6);
    const double top = std::min(uniform(rng, 0.55, 0.7), 0.9 * H);
    const double slab = 0.04, leg = 0.04;
    const auto [x, y] = place(w, d);
    const Vec3 tint = random_tint(rng);
    b.box(kTable, tint, Vec3(x, y, top - slab), Vec3(x + w, y + d, top), false, false);
    legs(b, kTable, tint, x, y, x + w, y + d, top - slab, leg);
    tops.push_back({x, y, x + w, y + d, top});
  }
  for (int c = 0; c < spec.chairs; ++c) {
    const double s = uniform(rng, 0.3, 0.4);
    const double seat = std::min(uniform(rng, 0.35, 0.45), 0.6 * H);
    const double back = uniform(rng, 0.3, 0.4);
    const double slab = 0.03, leg = 0.03;
    const auto [x, y] = place(s, s);
    const Vec3 tint = random_tint(rng);
    b.box(kChair, tint, Vec3(x, y, seat - slab), Vec3(x + s, y + s, seat), false, false);
    legs(b, kChair, tint, x, y, x + s, y + s, seat - slab, leg);
    // Backrest along one of the four seat edges.
    const int side = std::uniform_int_distribution<int>(0, 3)(rng);
    Vec3 lo(x, y, seat), hi(x + s, y + s, seat + back);
    if (side == 0) hi.x() = x + slab;
    else if (side == 1) lo.x() = x + s - slab;
    else if (side == 2) hi.y() = y + slab;
    else lo.y() = y + s - slab;
    b.box(kChair, tint, lo, hi, false, true);
  }
  for (int k = 0; k < spec.clutter; ++k) {
    const double w = uniform(rng, 0.06, 0.25), d = uniform(rng, 0.06, 0.25), h = uniform(rng, 0.05, 0.3);
    const Vec3 tint = random_tint(rng);
    const bool on_table = !tops.empty() && uniform(rng, 0.0, 1.0) < 0.5;
    Vec3 lo;
    if (on_table) {
      const Top& t = tops[std::uniform_int_distribution<std::size_t>(0, tops.size() - 1)(rng)];
      lo = Vec3(uniform(rng, t.x0, std::max(t.x0, t.x1 - w)), uniform(rng, t.y0, std::max(t.y0, t.y1 - d)), t.z);
    } else {
      const auto [x, y] = place(w, d);
      lo = Vec3(x, y, 0.0);
    }
    b.box(kClutter, tint, lo, lo + Vec3(w, d, h), false, true);
  }
  return patches;
}

PointCloud generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  const std::vector<SurfacePatch> patches = scene_patches(seed, spec);
  std::vector<Index> counts;
  Index total = 0;
  for (const SurfacePatch& p : patches) {
    counts.push_back(static_cast<Index>(std::llround(p.area() * spec.density)));
    total += counts.back();
  }
  if (total < spec.min_points) {
    throw std::invalid_argument("scene spec: density yields " + std::to_string(total) + " points, fewer than min_points " +
                                std::to_string(spec.min_points));
  }

  std::mt19937_64 rng(seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, spec.color_noise);
  PointCloud pc;
  pc.coords.resize(total, 3);
  pc.feats.resize(total, 4);
  pc.labels.resize(static_cast<std::size_t>(total));
  Index row = 0;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const SurfacePatch& p = patches[i];
    const Vec3 shade = 0.5 * (p.normal + Vec3::Ones());
    for (Index n = 0; n < counts[i]; ++n, ++row) {
      const Vec3 x = p.origin + unit(rng) * p.edge_u + unit(rng) * p.edge_v;
      pc.coords.row(row) = x.transpose();
      for (int c = 0; c < 3; ++c) {
        const double noisy = spec.color_noise > 0.0 ? noise(rng) : 0.0;
        pc.feats(row, c) = std::clamp(0.5 * shade[c] + 0.5 * p.tint[c] + noisy, 0.0, 1.0);
      }
      pc.feats(row, 3) = x.z();
      pc.labels[static_cast<std::size_t>(row)] = p.label;
    }
  }
  return round_to_storage_precision(pc);
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  const std::string text = read_file(manifest);
  std::istringstream in(text);
  std::vector<ManifestEntry> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string path, split, extra;
    if (!(fields >> path)) continue;
    if (!(fields >> split) || (split != "train" && split != "val") || (fields >> extra)) {
      throw std::invalid_argument(manifest.string() + ":" + std::to_string(line_no) +
                                  ": expected '<path> train|val'");
    }
    std::filesystem::path p(path);
    if (p.is_relative()) p = manifest.parent_path() / p;
    out.push_back({p, split == "train"});
  }
  if (out.empty()) throw std::invalid_argument(manifest.string() + ": manifest lists no clouds");
  return out;
}

void write_manifest(const std::filesystem::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::string text;
  for (const ManifestEntry& e : entries) {
    text += e.path.string() + " " + (e.train ? "train" : "val") + "\n";
  }
  write_file_atomic(manifest, text);
}

}  // namespace invaria
