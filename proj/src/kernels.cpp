#include "invaria/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <string>
#include <utility>

namespace invaria::kernels {

namespace {

inline bool closer(double d2a, int ia, double d2b, int ib) {
  return d2a < d2b || (d2a == d2b && ia < ib);
}

// Inserts (d2, id) into the ascending list if it beats the current worst.
inline void offer(int k, int& filled, int* idx, double* d2, double cand_d2, int cand_idx) {
  int pos;
  if (filled < k) {
    pos = filled++;
  } else {
    if (!closer(cand_d2, cand_idx, d2[k - 1], idx[k - 1])) return;
    pos = k - 1;
  }
  while (pos > 0 && closer(cand_d2, cand_idx, d2[pos - 1], idx[pos - 1])) {
    d2[pos] = d2[pos - 1];
    idx[pos] = idx[pos - 1];
    --pos;
  }
  d2[pos] = cand_d2;
  idx[pos] = cand_idx;
}

void check_knn_args(const Coords& refs, int k) {
  if (k < 1) throw std::invalid_argument("knn: k must be >= 1");
  if (k > refs.rows()) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " exceeds reference count " +
                                std::to_string(refs.rows()));
  }
}

}  // namespace

KdTree::KdTree(const Coords& refs, int leaf_size) : refs_(refs) {
  perm_.resize(static_cast<std::size_t>(refs.rows()));
  std::iota(perm_.begin(), perm_.end(), 0);
  if (!perm_.empty()) {
    nodes_.reserve(2 * perm_.size() / static_cast<std::size_t>(leaf_size) + 2);
    build(0, static_cast<int>(perm_.size()), std::max(1, leaf_size));
  }
}

int KdTree::build(int begin, int end, int leaf_size) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  for (int d = 0; d < 3; ++d) {
    node.lo[d] = std::numeric_limits<double>::infinity();
    node.hi[d] = -std::numeric_limits<double>::infinity();
  }
  for (int i = begin; i < end; ++i) {
    const double* p = refs_.row(perm_[i]).data();
    for (int d = 0; d < 3; ++d) {
      node.lo[d] = std::min(node.lo[d], p[d]);
      node.hi[d] = std::max(node.hi[d], p[d]);
    }
  }
  if (end - begin > leaf_size) {
    int dim = 0;
    for (int d = 1; d < 3; ++d) {
      if (node.hi[d] - node.lo[d] > node.hi[dim] - node.lo[dim]) dim = d;
    }
    const int mid = begin + (end - begin) / 2;
    std::nth_element(perm_.begin() + begin, perm_.begin() + mid, perm_.begin() + end, [&](int a, int b) {
      const double ca = refs_(a, dim);
      const double cb = refs_(b, dim);
      return ca < cb || (ca == cb && a < b);
    });
    node.left = build(begin, mid, leaf_size);
    node.right = build(mid, end, leaf_size);
  }
  nodes_[static_cast<std::size_t>(id)] = node;
  return id;
}

namespace {

inline double box_distance2(const double* lo, const double* hi, const double* q) {
  double acc = 0.0;
  for (int d = 0; d < 3; ++d) {
    double gap = 0.0;
    if (q[d] < lo[d]) {
      gap = lo[d] - q[d];
    } else if (q[d] > hi[d]) {
      gap = q[d] - hi[d];
    }
    acc += gap * gap;
  }
  return acc;
}

}  // namespace

void KdTree::search(int node_id, const double* q, int k, int* idx, double* d2, int& filled) const {
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const int r = perm_[static_cast<std::size_t>(i)];
      offer(k, filled, idx, d2, squared_distance(q, refs_.row(r).data()), r);
    }
    return;
  }
  const Node& l = nodes_[static_cast<std::size_t>(node.left)];
  const Node& r = nodes_[static_cast<std::size_t>(node.right)];
  const double dl = box_distance2(l.lo, l.hi, q);
  const double dr = box_distance2(r.lo, r.hi, q);
  const int first = dl <= dr ? node.left : node.right;
  const int second = dl <= dr ? node.right : node.left;
  const double dfirst = std::min(dl, dr);
  const double dsecond = std::max(dl, dr);
  // Equal box distance can still hide a lower-index tie, so prune only on strict excess.
  if (filled < k || dfirst <= d2[k - 1]) search(first, q, k, idx, d2, filled);
  if (filled < k || dsecond <= d2[k - 1]) search(second, q, k, idx, d2, filled);
}

void KdTree::query(const double* q, int k, int* out_idx, double* out_d2) const {
  int filled = 0;
  if (!nodes_.empty()) search(0, q, k, out_idx, out_d2, filled);
}

NeighborTable knn_serial(const Coords& queries, const Coords& refs, int k) {
  check_knn_args(refs, k);
  NeighborTable table;
  table.queries = queries.rows();
  table.k = k;
  table.indices.resize(static_cast<std::size_t>(queries.rows() * k));
  table.distances.resize(table.indices.size());
  std::vector<std::pair<double, int>> all(static_cast<std::size_t>(refs.rows()));
  for (Index q = 0; q < queries.rows(); ++q) {
    for (Index r = 0; r < refs.rows(); ++r) {
      all[static_cast<std::size_t>(r)] = {squared_distance(queries.row(q).data(), refs.row(r).data()),
                                          static_cast<int>(r)};
    }
    std::partial_sort(all.begin(), all.begin() + k, all.end());
    for (int j = 0; j < k; ++j) {
      table.indices[static_cast<std::size_t>(q * k + j)] = all[static_cast<std::size_t>(j)].second;
      table.distances[static_cast<std::size_t>(q * k + j)] = std::sqrt(all[static_cast<std::size_t>(j)].first);
    }
  }
  return table;
}

NeighborTable knn_parallel(const Coords& queries, const Coords& refs, int k) {
  check_knn_args(refs, k);
  NeighborTable table;
  table.queries = queries.rows();
  table.k = k;
  table.indices.resize(static_cast<std::size_t>(queries.rows() * k));
  table.distances.resize(table.indices.size());
  const KdTree tree(refs);
  const Index nq = queries.rows();
#pragma omp parallel for schedule(dynamic, 256)
  for (Index q = 0; q < nq; ++q) {
    int* idx = table.indices.data() + q * k;
    double* dist = table.distances.data() + q * k;
    tree.query(queries.row(q).data(), k, idx, dist);
    for (int j = 0; j < k; ++j) dist[j] = std::sqrt(dist[j]);
  }
  return table;
}

std::vector<double> nearest_distinct_serial(const Coords& points, std::span<const int> anchors) {
  std::vector<double> out(anchors.size());
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    const int self = anchors[a];
    double best = std::numeric_limits<double>::infinity();
    for (Index p = 0; p < points.rows(); ++p) {
      if (p == self) continue;
      best = std::min(best, squared_distance(points.row(self).data(), points.row(p).data()));
    }
    out[a] = std::sqrt(best);
  }
  return out;
}

std::vector<double> nearest_distinct_parallel(const Coords& points, std::span<const int> anchors) {
  std::vector<double> out(anchors.size());
  if (points.rows() < 2) {
    std::fill(out.begin(), out.end(), std::numeric_limits<double>::infinity());
    return out;
  }
  const KdTree tree(points);
  const auto n = static_cast<Index>(anchors.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (Index a = 0; a < n; ++a) {
    const int self = anchors[static_cast<std::size_t>(a)];
    int idx[2];
    double d2[2];
    tree.query(points.row(self).data(), 2, idx, d2);
    out[static_cast<std::size_t>(a)] = std::sqrt(idx[0] != self ? d2[0] : d2[1]);
  }
  return out;
}

namespace {

void check_edge_args(const Matrix& u, std::span<const int> nbr, int k, const Matrix& rel, const Matrix& w_rel,
                     const Matrix& bias) {
  if (k < 1 || nbr.size() % static_cast<std::size_t>(k) != 0) {
    throw std::invalid_argument("edge_max_relu: neighbor table not a multiple of k");
  }
  const auto edges = static_cast<Index>(nbr.size());
  if (rel.rows() != edges || rel.cols() != 3) throw std::invalid_argument("edge_max_relu: rel must be (P*k) x 3");
  if (w_rel.rows() != 3 || w_rel.cols() != u.cols()) throw std::invalid_argument("edge_max_relu: w_rel shape");
  if (bias.rows() != 1 || bias.cols() != u.cols()) throw std::invalid_argument("edge_max_relu: bias shape");
}

inline void edge_row(const Matrix& u, const int* nbr, int k, const Matrix& rel, const Matrix& w_rel,
                     const Matrix& bias, Index i, double* out, int* arg, std::vector<double>& scratch) {
  const Index h = u.cols();
  for (Index c = 0; c < h; ++c) {
    out[c] = 0.0;
    arg[c] = -1;
  }
  for (int j = 0; j < k; ++j) {
    const Index e = i * k + j;
    const double* r = rel.row(e).data();
    const double* src = u.row(nbr[j]).data();
    for (Index c = 0; c < h; ++c) {
      scratch[static_cast<std::size_t>(c)] =
          src[c] + (r[0] * w_rel(0, c) + r[1] * w_rel(1, c) + r[2] * w_rel(2, c)) + bias(0, c);
    }
    for (Index c = 0; c < h; ++c) {
      const double v = scratch[static_cast<std::size_t>(c)];
      if (v > out[c]) {
        out[c] = v;
        arg[c] = j;
      }
    }
  }
}

}  // namespace

EdgeMaxResult edge_max_relu_serial(const Matrix& u, std::span<const int> nbr, int k, const Matrix& rel,
                                   const Matrix& w_rel, const Matrix& bias) {
  check_edge_args(u, nbr, k, rel, w_rel, bias);
  const Index p = static_cast<Index>(nbr.size()) / k;
  EdgeMaxResult res{Matrix(p, u.cols()), std::vector<int>(static_cast<std::size_t>(p * u.cols()))};
  std::vector<double> scratch(static_cast<std::size_t>(u.cols()));
  for (Index i = 0; i < p; ++i) {
    edge_row(u, nbr.data() + i * k, k, rel, w_rel, bias, i, res.out.row(i).data(), res.argmax.data() + i * u.cols(),
             scratch);
  }
  return res;
}

EdgeMaxResult edge_max_relu_parallel(const Matrix& u, std::span<const int> nbr, int k, const Matrix& rel,
                                     const Matrix& w_rel, const Matrix& bias) {
  check_edge_args(u, nbr, k, rel, w_rel, bias);
  const Index p = static_cast<Index>(nbr.size()) / k;
  EdgeMaxResult res{Matrix(p, u.cols()), std::vector<int>(static_cast<std::size_t>(p * u.cols()))};
#pragma omp parallel
  {
    std::vector<double> scratch(static_cast<std::size_t>(u.cols()));
#pragma omp for schedule(static)
    for (Index i = 0; i < p; ++i) {
      edge_row(u, nbr.data() + i * k, k, rel, w_rel, bias, i, res.out.row(i).data(),
               res.argmax.data() + i * u.cols(), scratch);
    }
  }
  return res;
}

int configure_threads_from_env() {
  if (const char* env = std::getenv("INVARIA_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) omp_set_num_threads(std::min(cap, omp_get_num_procs()));
    } catch (const std::exception&) {
      // an unparsable cap is ignored
    }
  }
  return omp_get_max_threads();
}

}  // namespace invaria::kernels
