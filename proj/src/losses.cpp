#include "invaria/losses.hpp"

#include "invaria/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invaria {

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Index c = 0; c < logits.cols(); ++c) {
      out(i, c) = std::exp(logits(i, c) - m);
      z += out(i, c);
    }
    out.row(i) /= z;
  }
  return out;
}

namespace {

void check_labels(Index rows, Index classes, std::span<const int> labels, int ignore_label, const char* who) {
  if (static_cast<Index>(labels.size()) != rows) {
    throw std::invalid_argument(std::string(who) + ": label count does not match rows");
  }
  for (const int l : labels) {
    if (l != ignore_label && (l < 0 || l >= classes)) {
      throw std::invalid_argument(std::string(who) + ": label " + std::to_string(l) + " out of range");
    }
  }
}

}  // namespace

double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad, int ignore_label) {
  check_labels(logits.rows(), logits.cols(), labels, ignore_label, "cross_entropy");
  Index valid = 0;
  for (const int l : labels) valid += (l != ignore_label);
  if (valid == 0) throw EmptySupervision("cross_entropy: every label is ignored");

  double sum = 0.0;
  if (grad) grad->setZero(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l == ignore_label) continue;
    const double m = logits.row(i).maxCoeff();
    double z = 0.0;
    for (Index c = 0; c < logits.cols(); ++c) z += std::exp(logits(i, c) - m);
    const double log_z = m + std::log(z);
    sum += log_z - logits(i, l);
    if (grad) {
      for (Index c = 0; c < logits.cols(); ++c) (*grad)(i, c) = std::exp(logits(i, c) - log_z);
      (*grad)(i, l) -= 1.0;
    }
  }
  const double inv = 1.0 / static_cast<double>(valid);
  if (grad) *grad *= inv;
  return sum * inv;
}

double lovasz_softmax(const Matrix& probs, std::span<const int> labels, Matrix* grad, int ignore_label) {
  check_labels(probs.rows(), probs.cols(), labels, ignore_label, "lovasz_softmax");
  for (Index i = 0; i < probs.rows(); ++i) {
    if (std::abs(probs.row(i).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("lovasz_softmax: row " + std::to_string(i) + " does not sum to 1");
    }
  }
  std::vector<int> rows;
  rows.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != ignore_label) rows.push_back(static_cast<int>(i));
  }
  if (rows.empty()) throw EmptySupervision("lovasz_softmax: every label is ignored");

  if (grad) grad->setZero(probs.rows(), probs.cols());
  const std::size_t n = rows.size();
  std::vector<double> err(n);
  std::vector<int> order(n);
  std::vector<double> weight(n);
  double total = 0.0;
  int present = 0;

  for (Index c = 0; c < probs.cols(); ++c) {
    double gts = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      const bool fg = labels[static_cast<std::size_t>(rows[s])] == c;
      gts += fg ? 1.0 : 0.0;
      const double p = probs(rows[s], c);
      err[s] = fg ? 1.0 - p : p;
    }
    if (gts == 0.0) continue;
    ++present;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return err[static_cast<std::size_t>(a)] > err[static_cast<std::size_t>(b)]; });
    // Jaccard gradient over the sorted order from running intersection/union counts.
    double cum_fg = 0.0;
    double cum_bg = 0.0;
    double prev_jaccard = 0.0;
    double loss_c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const int s = order[j];
      const bool fg = labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(s)])] == c;
      (fg ? cum_fg : cum_bg) += 1.0;
      const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
      weight[j] = jaccard - prev_jaccard;
      prev_jaccard = jaccard;
      loss_c += err[static_cast<std::size_t>(s)] * weight[j];
    }
    total += loss_c;
    if (grad) {
      for (std::size_t j = 0; j < n; ++j) {
        const int s = order[j];
        const int r = rows[static_cast<std::size_t>(s)];
        const bool fg = labels[static_cast<std::size_t>(r)] == c;
        (*grad)(r, c) += fg ? -weight[j] : weight[j];
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(present);
  if (grad) *grad *= inv;
  return total * inv;
}

std::vector<ad::AlignmentMatch> match_token_sets(std::span<const TokenSet> sets) {
  std::vector<ad::AlignmentMatch> matches;
  const int m = static_cast<int>(sets.size());
  for (int a = 0; a < m; ++a) {
    for (int b = a + 1; b < m; ++b) {
      const TokenSet& from = sets[static_cast<std::size_t>(a)];
      const TokenSet& to = sets[static_cast<std::size_t>(b)];
      if (from.size() == 0 || to.size() == 0) throw std::invalid_argument("alignment: empty token set");
      if (from.locations.rows() != from.size() || to.locations.rows() != to.size()) {
        throw std::invalid_argument("alignment: one location per token required");
      }
      matches.push_back({a, b, nearest_indices(from.locations, to.locations)});
    }
  }
  return matches;
}

double alignment_loss_matched(std::span<const Matrix* const> tokens, std::span<const ad::AlignmentMatch> matches,
                              int num_sets, std::vector<Matrix>* grads) {
  if (grads) {
    grads->assign(tokens.size(), Matrix());
    for (std::size_t s = 0; s < tokens.size(); ++s) (*grads)[s] = Matrix::Zero(tokens[s]->rows(), tokens[s]->cols());
  }
  if (num_sets < 2) return 0.0;
  for (const Matrix* t : tokens) {
    for (Index i = 0; i < t->rows(); ++i) {
      if (!(t->row(i).squaredNorm() > 0.0)) throw std::invalid_argument("alignment: zero-norm token vector");
    }
  }
  const double pairs = 0.5 * num_sets * (num_sets - 1);
  double total = 0.0;
  for (const ad::AlignmentMatch& match : matches) {
    const Matrix& zf = *tokens[static_cast<std::size_t>(match.from)];
    const Matrix& zt = *tokens[static_cast<std::size_t>(match.to)];
    if (zf.cols() != zt.cols()) throw std::invalid_argument("alignment: token width mismatch");
    const double inv_count = 1.0 / static_cast<double>(zf.rows());
    double pair_sum = 0.0;
    for (Index i = 0; i < zf.rows(); ++i) {
      const Index j = match.nearest[static_cast<std::size_t>(i)];
      const auto a = zf.row(i);
      const auto b = zt.row(j);
      const double na = a.norm();
      const double nb = b.norm();
      const double dot = a.dot(b);
      const double cosine = dot / (na * nb);
      pair_sum += 1.0 - cosine;
      if (grads) {
        const double w = inv_count / pairs;
        // d(1 - cos)/da = -(b / (|a||b|) - cos * a / |a|^2)
        (*grads)[static_cast<std::size_t>(match.from)].row(i) -= w * (b / (na * nb) - cosine * a / (na * na));
        (*grads)[static_cast<std::size_t>(match.to)].row(j) -= w * (a / (na * nb) - cosine * b / (nb * nb));
      }
    }
    total += pair_sum * inv_count;
  }
  return total / pairs;
}

double alignment_loss(std::span<const TokenSet> sets, std::vector<Matrix>* grads) {
  if (sets.size() < 2) {
    if (grads) {
      grads->clear();
      for (const TokenSet& s : sets) grads->push_back(Matrix::Zero(s.tokens.rows(), s.tokens.cols()));
    }
    return 0.0;
  }
  const std::vector<ad::AlignmentMatch> matches = match_token_sets(sets);
  std::vector<const Matrix*> tokens;
  for (const TokenSet& s : sets) tokens.push_back(&s.tokens);
  return alignment_loss_matched(tokens, matches, static_cast<int>(sets.size()), grads);
}

LambdaSchedule parse_schedule(std::string_view name) {
  if (name == "uniform") return LambdaSchedule::kUniform;
  if (name == "increase") return LambdaSchedule::kIncrease;
  throw std::invalid_argument("unknown lambda schedule '" + std::string(name) + "' (uniform|increase)");
}

std::string to_string(LambdaSchedule s) { return s == LambdaSchedule::kUniform ? "uniform" : "increase"; }

std::vector<double> LossWeights::resolve(int levels) const {
  if (levels < 1) throw std::invalid_argument("loss weights: need at least one supervised level");
  if (!lambdas.empty()) {
    if (static_cast<int>(lambdas.size()) != levels) {
      throw std::invalid_argument("loss weights: " + std::to_string(lambdas.size()) + " lambdas for " +
                                  std::to_string(levels) + " supervised levels");
    }
    bool any_positive = false;
    for (const double l : lambdas) {
      if (l < 0.0) throw std::invalid_argument("loss weights: lambdas must be non-negative");
      any_positive = any_positive || l > 0.0;
    }
    if (!any_positive) throw std::invalid_argument("loss weights: at least one lambda must be positive");
    return lambdas;
  }
  std::vector<double> out(static_cast<std::size_t>(levels));
  if (schedule == LambdaSchedule::kUniform) {
    std::fill(out.begin(), out.end(), 1.0 / levels);
    return out;
  }
  double sum = 0.0;
  for (int m = 0; m < levels; ++m) {
    out[static_cast<std::size_t>(m)] = std::ldexp(1.0, m + 1);
    sum += out[static_cast<std::size_t>(m)];
  }
  for (double& v : out) v /= sum;
  return out;
}

LossBreakdown total_loss(std::span<const LevelTarget> per_level, std::span<const TokenSet> token_sets,
                         const LossWeights& weights) {
  if (weights.beta < 0.0) throw std::invalid_argument("total_loss: beta must be non-negative");
  const std::vector<double> lambdas = weights.resolve(static_cast<int>(per_level.size()));
  LossBreakdown out;
  for (std::size_t m = 0; m < per_level.size(); ++m) {
    const LevelTarget& lvl = per_level[m];
    const double ce = cross_entropy(lvl.logits, lvl.labels);
    const double ls = lovasz_softmax(softmax_rows(lvl.logits), lvl.labels);
    out.ce += lambdas[m] * ce;
    out.ls += lambdas[m] * ls;
  }
  out.align = alignment_loss(token_sets);
  out.total = out.ce + out.ls + weights.beta * out.align;
  return out;
}

}  // namespace invaria
