#pragma once

#include "invaria/nn.hpp"
#include "invaria/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <vector>

namespace invaria {

struct PredictorConfig {
  int n_layers = 2;
  int channels = 32;
  int refine_k = 8;
  nn::NormKind norm = nn::NormKind::kLayer;

  void validate() const;
};

/// Coordinates for the next resolution. With `target` the coordinates are
/// returned verbatim (they must contain every sparse point). With `ratio` the
/// sparse points are kept in order and ceil((ratio - 1) * P) midpoints of random
/// (point, one of its 3 nearest neighbors) edges are appended.
Coords densify_coords(const Coords& sparse, const Coords* target, std::optional<double> ratio, std::uint64_t seed);

/// Dense points take the feature of their nearest sparse point.
nn::FeatureMap init_features_nn(const nn::FeatureMap& sparse, std::shared_ptr<const Coords> dense_coords,
                                double dense_grid);

/// Residual refinement: f + W2 relu(W1 norm(neighbor_max(f)) + b1) + b2, with W2, b2 zero at init.
class RefineBlock {
 public:
  RefineBlock() = default;
  RefineBlock(nn::ParameterStore& store, const std::string& name, Index channels, nn::NormKind norm,
              std::mt19937_64& rng);

  nn::FeatureMap forward(ad::Tape& tape, const nn::FeatureMap& in, std::shared_ptr<const ad::EdgeSet> edges) const;

 private:
  nn::NeighborMax aggregate_;
  nn::Norm norm_;
  nn::Linear fc1_;
  nn::Linear fc2_;
};

/// Densify-then-refine module shared across all resolution steps.
class Predictor {
 public:
  Predictor() = default;
  Predictor(nn::ParameterStore& store, const PredictorConfig& cfg, std::mt19937_64& rng);

  nn::FeatureMap refine(ad::Tape& tape, const nn::FeatureMap& fm) const;

  /// refine(init_features_nn(sparse, dense)), refined at `dense_grid`.
  nn::FeatureMap predict_next_resolution(ad::Tape& tape, const nn::FeatureMap& sparse,
                                         std::shared_ptr<const Coords> dense_coords, double dense_grid) const;

  const PredictorConfig& config() const { return cfg_; }

 private:
  PredictorConfig cfg_;
  std::vector<RefineBlock> blocks_;
};

}  // namespace invaria
