#pragma once

// Hot loops of the pipeline. Every kernel has a `_serial` reference that is
// kept deliberately simple and a `_parallel` variant (OpenMP over independent
// output rows). Both produce bit-identical results; the tests compare them and
// bench/ measures the speedup.

#include "invaria/types.hpp"

#include <span>
#include <vector>

namespace invaria::kernels {

/// Dense Q x k neighbor table, rows sorted by (distance, reference index).
struct NeighborTable {
  Index queries = 0;
  int k = 0;
  std::vector<int> indices;
  std::vector<double> distances;

  int index(Index q, int j) const { return indices[static_cast<std::size_t>(q * k + j)]; }
  double distance(Index q, int j) const { return distances[static_cast<std::size_t>(q * k + j)]; }
};

/// Static k-d tree over a reference set. Queries are read-only and thread-safe.
class KdTree {
 public:
  explicit KdTree(const Coords& refs, int leaf_size = 12);

  Index size() const { return static_cast<Index>(perm_.size()); }

  /// Writes the k nearest references of `q` (squared distances) in ascending
  /// (d2, index) order. Requires k <= size().
  void query(const double* q, int k, int* out_idx, double* out_d2) const;

 private:
  struct Node {
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
    double lo[3] = {0, 0, 0};
    double hi[3] = {0, 0, 0};
  };

  int build(int begin, int end, int leaf_size);
  void search(int node, const double* q, int k, int* idx, double* d2, int& filled) const;

  const Coords& refs_;
  std::vector<int> perm_;
  std::vector<Node> nodes_;
};

/// Squared Euclidean distance, evaluated in one fixed order so every caller agrees bitwise.
inline double squared_distance(const double* a, const double* b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

NeighborTable knn_serial(const Coords& queries, const Coords& refs, int k);
NeighborTable knn_parallel(const Coords& queries, const Coords& refs, int k);

/// Distance from each anchor to its nearest point with a different index.
std::vector<double> nearest_distinct_serial(const Coords& points, std::span<const int> anchors);
std::vector<double> nearest_distinct_parallel(const Coords& points, std::span<const int> anchors);

/// Output of the fused neighbor transform-and-max kernel.
struct EdgeMaxResult {
  Matrix out;               // P x H
  std::vector<int> argmax;  // P x H neighbor slot that won the max, -1 when the ReLU clipped it
};

/// out(i,c) = max(0, max_j [u(nbr(i,j),c) + rel(i*k+j,:) . w_rel(:,c) + bias(c)]).
/// `nbr` is P x k (row-major), `rel` is (P*k) x 3.
EdgeMaxResult edge_max_relu_serial(const Matrix& u, std::span<const int> nbr, int k, const Matrix& rel,
                                   const Matrix& w_rel, const Matrix& bias);
EdgeMaxResult edge_max_relu_parallel(const Matrix& u, std::span<const int> nbr, int k, const Matrix& rel,
                                     const Matrix& w_rel, const Matrix& bias);

/// Applies the INVARIA_THREADS cap (if set) to the OpenMP runtime. Returns the active thread count.
int configure_threads_from_env();

}  // namespace invaria::kernels
