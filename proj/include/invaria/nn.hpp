#pragma once

#include "invaria/autodiff.hpp"
#include "invaria/kernels.hpp"
#include "invaria/types.hpp"

#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <string_view>

namespace invaria::nn {

/// Owns parameters with stable addresses, in registration order.
class ParameterStore {
 public:
  ad::Parameter& add(std::string name, Matrix value, bool trainable = true);
  ad::Parameter* find(std::string_view name);
  const ad::Parameter* find(std::string_view name) const;

  std::deque<ad::Parameter>& all() { return params_; }
  const std::deque<ad::Parameter>& all() const { return params_; }

  void zero_grad();
  /// Number of trainable scalars.
  Index trainable_count() const;

 private:
  std::deque<ad::Parameter> params_;
};

/// Uniform(-b, b) with b = sqrt(6 / fan_in), scaled by `gain`.
Matrix kaiming_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng, double gain = 1.0);

enum class NormKind { kLayer, kBatch };

NormKind parse_norm(std::string_view name);
std::string to_string(NormKind n);

/// Points with features at one stage of the hierarchy. `stage_grid` is the
/// spacing (meters) that normalizes relative positions at this stage.
struct FeatureMap {
  std::shared_ptr<const Coords> coords;
  ad::Var feats;
  double stage_grid = 0.0;

  Index size() const { return coords ? coords->rows() : 0; }
};

/// k-nearest-neighbor edges (self included) with relative positions divided by `grid`.
std::shared_ptr<const ad::EdgeSet> build_edges(const Coords& coords, int k, double grid);

class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng,
         bool zero_init = false);

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;
  Index in_features() const { return weight_->value.rows(); }
  Index out_features() const { return weight_->value.cols(); }

 private:
  ad::Parameter* weight_ = nullptr;
  ad::Parameter* bias_ = nullptr;
};

class Norm {
 public:
  Norm() = default;
  Norm(ParameterStore& store, const std::string& name, Index channels, NormKind kind);

  ad::Var forward(ad::Tape& tape, const ad::Var& x) const;

 private:
  NormKind kind_ = NormKind::kLayer;
  ad::Parameter* gamma_ = nullptr;
  ad::Parameter* beta_ = nullptr;
  ad::Parameter* running_mean_ = nullptr;
  ad::Parameter* running_var_ = nullptr;
};

/// Shared neighbor transform followed by a max over the neighborhood:
/// h_i = max_j relu(W_f f_j + W_r (x_j - x_i) / grid + b).
class NeighborMax {
 public:
  NeighborMax() = default;
  NeighborMax(ParameterStore& store, const std::string& name, Index in, Index hidden, std::mt19937_64& rng);

  ad::Var forward(ad::Tape& tape, const ad::Var& feats, std::shared_ptr<const ad::EdgeSet> edges) const;

 private:
  ad::Parameter* w_feat_ = nullptr;
  ad::Parameter* w_rel_ = nullptr;
  ad::Parameter* bias_ = nullptr;
};

}  // namespace invaria::nn
