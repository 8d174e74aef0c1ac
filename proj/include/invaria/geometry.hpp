#pragma once

#include "invaria/kernels.hpp"
#include "invaria/types.hpp"

#include <cstdint>
#include <vector>

namespace invaria {

/// Cell assignment of a point set on a regular grid. Cells are numbered in
/// order of first appearance, so the result depends only on input order.
struct GridAssignment {
  std::vector<int> inverse_index;  // point -> cell
  int num_cells = 0;
};

GridAssignment assign_grid_cells(const Coords& coords, double grid);

/// Pooled cloud plus the source-point -> pooled-point map.
struct VoxelizationResult {
  PointCloud pooled;
  std::vector<int> inverse_index;
};

/// Quantizes `pc` on a grid of edge `grid` meters. A cell's representative is
/// the mean coordinate and mean feature of its members; its label is the
/// majority non-ignored member label (smallest id on ties).
VoxelizationResult voxelize(const PointCloud& pc, double grid);

/// `n` distinct indices drawn uniformly from [0, total), in draw order.
std::vector<int> sample_indices(Index total, Index n, std::uint64_t seed);

/// Uniform random subset of exactly n points; fields stay aligned.
PointCloud subsample(const PointCloud& pc, Index n, std::uint64_t seed);

/// Nested chain of subsampled clouds, ordered coarse -> fine.
struct ResolutionPyramid {
  std::vector<PointCloud> levels;
  std::vector<Index> cardinalities;

  int depth() const { return static_cast<int>(levels.size()); }
};

/// Levels have n0 * h^i points for every such count strictly below pc.size().
ResolutionPyramid build_pyramid(const PointCloud& pc, Index n0, int h, std::uint64_t seed);

/// Multiplies coordinates by s; features and labels are untouched.
PointCloud apply_scale(const PointCloud& pc, double s);

/// k nearest references per query, ascending by distance, ties to the lower index.
/// A query that coincides with a reference gets that reference as a neighbor.
kernels::NeighborTable knn(const Coords& queries, const Coords& refs, int k);

/// Index of the nearest reference for every query.
std::vector<int> nearest_indices(const Coords& queries, const Coords& refs);

/// Mean coordinate of each cell.
Coords cell_means(const Coords& coords, const GridAssignment& cells);

}  // namespace invaria
