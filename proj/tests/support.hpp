#pragma once
// Reference implementations used as oracles by the unit and acceptance tests.
// They are written independently of the library code paths they check.

#include "invaria/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace invaria::testing {

inline PointCloud random_cloud(Index n, std::uint64_t seed, int feat_dim = 4, int classes = 5, double extent = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, extent);
  std::uniform_real_distribution<double> f(-1.0, 1.0);
  std::uniform_int_distribution<int> c(0, classes - 1);
  PointCloud pc;
  pc.coords.resize(n, 3);
  pc.feats.resize(n, feat_dim);
  for (Index i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) pc.coords(i, d) = u(rng);
    for (int d = 0; d < feat_dim; ++d) pc.feats(i, d) = f(rng);
    pc.labels.push_back(c(rng));
  }
  return pc;
}

inline double dist2(const Coords& a, Index i, const Coords& b, Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

/// Index of the nearest row of `refs` to row q of `queries`; lowest index on ties.
inline int brute_nearest(const Coords& queries, Index q, const Coords& refs) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < refs.rows(); ++j) {
    const double d = dist2(queries, q, refs, j);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

/// All pairwise distances, then per point the minimum over j != i.
inline std::vector<double> exhaustive_nearest_distinct(const Coords& p) {
  const Index n = p.rows();
  std::vector<double> out(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out[static_cast<std::size_t>(i)] = std::min(out[static_cast<std::size_t>(i)], std::sqrt(dist2(p, i, p, j)));
    }
  }
  return out;
}

/// 1 - mean IoU over classes present in `gt`, counted directly from the hard predictions.
inline double one_minus_present_iou(const std::vector<int>& pred, const std::vector<int>& gt, int classes) {
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    int inter = 0, uni = 0, in_gt = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      const bool g = gt[i] == c, p = pred[i] == c;
      in_gt += g;
      inter += g && p;
      uni += g || p;
    }
    if (in_gt == 0) continue;
    ++present;
    sum += static_cast<double>(inter) / uni;
  }
  return 1.0 - sum / present;
}

/// Central finite-difference gradient of f with respect to every entry of x.
inline Matrix numeric_gradient(const std::function<double()>& f, Matrix& x, double step = 1e-4) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + step;
    const double up = f();
    x.data()[i] = keep - step;
    const double down = f();
    x.data()[i] = keep;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

/// Max entrywise error relative to the larger gradient magnitude (floored to avoid 0/0).
inline double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-6) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline std::vector<int> random_labels(Index n, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, k - 1);
  std::vector<int> out(static_cast<std::size_t>(n));
  for (int& x : out) x = d(rng);
  return out;
}

/// Mean of log-sum-exp minus the true logit, one point at a time.
inline double naive_ce(const Matrix& logits, const std::vector<int>& labels) {
  double sum = 0.0;
  int n = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y == kIgnoreLabel) continue;
    double z = 0.0;
    for (Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(i, c));
    sum += std::log(z) - logits(i, y);
    ++n;
  }
  return sum / n;
}

inline Matrix hard_probs(const std::vector<int>& pred, int k) {
  Matrix p = Matrix::Zero(static_cast<Index>(pred.size()), k);
  for (std::size_t i = 0; i < pred.size(); ++i) p(static_cast<Index>(i), pred[i]) = 1.0;
  return p;
}

inline double cosine(const Matrix& a, Index i, const Matrix& b, Index j) {
  return a.row(i).dot(b.row(j)) / (a.row(i).norm() * b.row(j).norm());
}

/// Scans every token of the other set for the nearest location.
inline double brute_alignment(const std::vector<TokenSet>& sets) {
  const std::size_t m = sets.size();
  if (m < 2) return 0.0;
  double total = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      double sum = 0.0;
      for (Index i = 0; i < sets[a].size(); ++i) {
        const Index j = brute_nearest(sets[a].locations, i, sets[b].locations);
        sum += 1.0 - cosine(sets[a].tokens, i, sets[b].tokens, j);
      }
      total += sum / static_cast<double>(sets[a].size());
    }
  }
  return total / (0.5 * static_cast<double>(m * (m - 1)));
}

inline TokenSet random_tokens(Index n, Index c, std::uint64_t seed) {
  return TokenSet{random_matrix(n, c, seed), random_cloud(n, seed + 100).coords};
}

}  // namespace invaria::testing
