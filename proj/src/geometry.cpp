#include "invaria/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

namespace invaria {

PointCloud PointCloud::select(std::span<const int> idx) const {
  PointCloud out;
  const auto n = static_cast<Index>(idx.size());
  out.coords.resize(n, 3);
  out.feats.resize(n, feats.cols());
  if (has_labels()) out.labels.resize(idx.size());
  for (Index i = 0; i < n; ++i) {
    const int src = idx[static_cast<std::size_t>(i)];
    out.coords.row(i) = coords.row(src);
    if (feats.cols() > 0) out.feats.row(i) = feats.row(src);
    if (has_labels()) out.labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
  }
  return out;
}

void PointCloud::validate(int num_classes) const {
  if (feats.rows() != coords.rows()) throw std::invalid_argument("point cloud: feature rows != point count");
  if (has_labels() && static_cast<Index>(labels.size()) != coords.rows()) {
    throw std::invalid_argument("point cloud: label count != point count");
  }
  if (!coords.allFinite()) throw std::invalid_argument("point cloud: non-finite coordinate");
  for (const int l : labels) {
    if (l == kIgnoreLabel) continue;
    if (l < 0 || (num_classes > 0 && l >= num_classes)) {
      throw std::invalid_argument("point cloud: label " + std::to_string(l) + " out of range");
    }
  }
}

namespace {

struct CellKey {
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.y) + 0x517CC1B727220A95ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

GridAssignment assign_grid_cells(const Coords& coords, double grid) {
  if (!(grid > 0.0) || !std::isfinite(grid)) throw std::invalid_argument("grid size must be positive");
  GridAssignment out;
  out.inverse_index.resize(static_cast<std::size_t>(coords.rows()));
  std::unordered_map<CellKey, int, CellKeyHash> cells;
  cells.reserve(static_cast<std::size_t>(coords.rows()));
  for (Index i = 0; i < coords.rows(); ++i) {
    const CellKey key{static_cast<std::int64_t>(std::floor(coords(i, 0) / grid)),
                      static_cast<std::int64_t>(std::floor(coords(i, 1) / grid)),
                      static_cast<std::int64_t>(std::floor(coords(i, 2) / grid))};
    auto [it, inserted] = cells.try_emplace(key, out.num_cells);
    if (inserted) ++out.num_cells;
    out.inverse_index[static_cast<std::size_t>(i)] = it->second;
  }
  return out;
}

Coords cell_means(const Coords& coords, const GridAssignment& cells) {
  Coords sum = Coords::Zero(cells.num_cells, 3);
  std::vector<int> count(static_cast<std::size_t>(cells.num_cells), 0);
  for (Index i = 0; i < coords.rows(); ++i) {
    const int c = cells.inverse_index[static_cast<std::size_t>(i)];
    sum.row(c) += coords.row(i);
    ++count[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < cells.num_cells; ++c) sum.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
  return sum;
}

VoxelizationResult voxelize(const PointCloud& pc, double grid) {
  if (!(grid > 0.0)) throw std::invalid_argument("voxelize: grid size must be positive");
  if (pc.size() == 0) throw std::invalid_argument("voxelize: empty cloud");
  const GridAssignment cells = assign_grid_cells(pc.coords, grid);
  const int m = cells.num_cells;

  VoxelizationResult res;
  res.inverse_index = cells.inverse_index;
  res.pooled.coords = cell_means(pc.coords, cells);
  res.pooled.feats = Matrix::Zero(m, pc.feature_dim());
  std::vector<int> count(static_cast<std::size_t>(m), 0);
  for (Index i = 0; i < pc.size(); ++i) {
    const int c = cells.inverse_index[static_cast<std::size_t>(i)];
    if (pc.feature_dim() > 0) res.pooled.feats.row(c) += pc.feats.row(i);
    ++count[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < m; ++c) {
    if (pc.feature_dim() > 0) res.pooled.feats.row(c) /= static_cast<double>(count[static_cast<std::size_t>(c)]);
  }

  if (pc.has_labels()) {
    int max_label = -1;
    for (const int l : pc.labels) max_label = std::max(max_label, l);
    const int classes = max_label + 1;
    res.pooled.labels.assign(static_cast<std::size_t>(m), kIgnoreLabel);
    if (classes > 0) {
      std::vector<int> votes(static_cast<std::size_t>(m) * static_cast<std::size_t>(classes), 0);
      for (Index i = 0; i < pc.size(); ++i) {
        const int l = pc.labels[static_cast<std::size_t>(i)];
        if (l == kIgnoreLabel) continue;
        const int c = cells.inverse_index[static_cast<std::size_t>(i)];
        ++votes[static_cast<std::size_t>(c) * static_cast<std::size_t>(classes) + static_cast<std::size_t>(l)];
      }
      for (int c = 0; c < m; ++c) {
        const int* v = votes.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(classes);
        int best = kIgnoreLabel;
        int best_votes = 0;
        for (int l = 0; l < classes; ++l) {
          if (v[l] > best_votes) {
            best_votes = v[l];
            best = l;
          }
        }
        res.pooled.labels[static_cast<std::size_t>(c)] = best;
      }
    }
  }
  return res;
}

std::vector<int> sample_indices(Index total, Index n, std::uint64_t seed) {
  if (n < 1 || n > total) {
    throw std::invalid_argument("subsample: need 1 <= n <= N (n=" + std::to_string(n) +
                                ", N=" + std::to_string(total) + ")");
  }
  std::vector<int> idx(static_cast<std::size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (Index i = 0; i < n; ++i) {
    std::uniform_int_distribution<Index> pick(i, total - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  idx.resize(static_cast<std::size_t>(n));
  return idx;
}

PointCloud subsample(const PointCloud& pc, Index n, std::uint64_t seed) {
  const std::vector<int> idx = sample_indices(pc.size(), n, seed);
  return pc.select(idx);
}

ResolutionPyramid build_pyramid(const PointCloud& pc, Index n0, int h, std::uint64_t seed) {
  if (n0 < 1) throw std::invalid_argument("build_pyramid: n0 must be >= 1");
  if (h < 2) throw std::invalid_argument("build_pyramid: h must be > 1");
  if (n0 >= pc.size()) {
    throw std::invalid_argument("build_pyramid: n0=" + std::to_string(n0) + " leaves no level below N=" +
                                std::to_string(pc.size()));
  }
  std::vector<Index> counts;
  for (Index n = n0; n < pc.size(); n *= h) counts.push_back(n);

  ResolutionPyramid pyr;
  pyr.cardinalities = counts;
  pyr.levels.resize(counts.size());
  const PointCloud* finer = &pc;
  for (std::size_t i = counts.size(); i-- > 0;) {
    pyr.levels[i] = subsample(*finer, counts[i], seed + 0x9E37ULL * (i + 1));
    finer = &pyr.levels[i];
  }
  return pyr;
}

PointCloud apply_scale(const PointCloud& pc, double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("apply_scale: factor must be positive");
  PointCloud out = pc;
  out.coords *= s;
  return out;
}

kernels::NeighborTable knn(const Coords& queries, const Coords& refs, int k) {
  return kernels::knn_parallel(queries, refs, k);
}

std::vector<int> nearest_indices(const Coords& queries, const Coords& refs) {
  kernels::NeighborTable t = knn(queries, refs, 1);
  return std::move(t.indices);
}

}  // namespace invaria
