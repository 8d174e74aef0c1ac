#pragma once

#include "invaria/autodiff.hpp"
#include "invaria/types.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace invaria {

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

/// Mean negative log-softmax over non-ignored points. When `grad` is given it
/// receives dLoss/dlogits. Throws EmptySupervision when every label is ignored.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad = nullptr,
                     int ignore_label = kIgnoreLabel);

/// Lovasz extension of the Jaccard loss over the descending-sorted errors of each
/// class present in `labels`, averaged over those classes. Rows of `probs` must
/// sum to 1 within 1e-6. `grad` receives dLoss/dprobs.
double lovasz_softmax(const Matrix& probs, std::span<const int> labels, Matrix* grad = nullptr,
                      int ignore_label = kIgnoreLabel);

/// Nearest-location matches for every ordered pair m < l of token sets.
std::vector<ad::AlignmentMatch> match_token_sets(std::span<const TokenSet> sets);

/// Cosine alignment across resolutions: for every pair m < l, the mean over tokens z
/// of set m of 1 - cos(z, nearest token of set l), summed and divided by C(M, 2).
/// Zero for fewer than two sets. `grads` (if given) receives one matrix per set.
double alignment_loss(std::span<const TokenSet> sets, std::vector<Matrix>* grads = nullptr);

/// Shared kernel of alignment_loss and its tape op.
double alignment_loss_matched(std::span<const Matrix* const> tokens, std::span<const ad::AlignmentMatch> matches,
                              int num_sets, std::vector<Matrix>* grads);

enum class LambdaSchedule { kUniform, kIncrease };

LambdaSchedule parse_schedule(std::string_view name);
std::string to_string(LambdaSchedule s);

/// Per-level segmentation weights and the alignment scale.
struct LossWeights {
  std::vector<double> lambdas;  // explicit weights; when empty they follow `schedule`
  double beta = 0.1;
  LambdaSchedule schedule = LambdaSchedule::kIncrease;

  /// Weights for `levels` supervised levels. "increase" is proportional to 2^m, "uniform" is 1/levels.
  std::vector<double> resolve(int levels) const;
};

struct LevelTarget {
  Matrix logits;
  std::vector<int> labels;
};

struct LossBreakdown {
  double total = 0.0;
  double ce = 0.0;     // lambda-weighted sum of cross-entropy terms
  double ls = 0.0;     // lambda-weighted sum of Lovasz terms
  double align = 0.0;  // unweighted alignment loss
};

/// sum_m lambda_m (CE_m + LS_m) + beta * L_align, with LS evaluated on softmax(logits).
LossBreakdown total_loss(std::span<const LevelTarget> per_level, std::span<const TokenSet> token_sets,
                         const LossWeights& weights);

}  // namespace invaria
