#pragma once

#include "invaria/nn.hpp"
#include "invaria/types.hpp"

#include <memory>
#include <random>
#include <vector>

namespace invaria {

struct BackboneConfig {
  std::vector<int> enc_depths{1, 1, 1};
  std::vector<int> enc_channels{16, 32, 64};
  std::vector<int> dec_depths{1, 1};
  std::vector<int> dec_channels{32, 32};
  int k_neighbors = 16;
  int bottleneck_layers = 1;
  nn::NormKind norm = nn::NormKind::kLayer;
  int out_dim = 32;

  int num_stages() const { return static_cast<int>(enc_channels.size()); }
  void validate() const;

  /// Small configuration used for laptop-scale experiments.
  static BackboneConfig desk();
  /// Five-stage configuration with the full-size widths.
  static BackboneConfig full_size();
};

/// Residual neighborhood block: out = norm(f + W_o * max_j relu(W_f f_j + W_r (x_j - x_i)/grid + b) + b_o).
class AggregateBlock {
 public:
  AggregateBlock() = default;
  AggregateBlock(nn::ParameterStore& store, const std::string& name, Index channels, nn::NormKind norm,
                 std::mt19937_64& rng);

  nn::FeatureMap forward(ad::Tape& tape, const nn::FeatureMap& in, std::shared_ptr<const ad::EdgeSet> edges) const;
  /// Builds the k-nearest-neighbor edges at in.stage_grid, then runs forward().
  nn::FeatureMap forward(ad::Tape& tape, const nn::FeatureMap& in, int k) const;

 private:
  nn::NeighborMax aggregate_;
  nn::Linear project_;
  nn::Norm norm_;
};

/// Max-pools features onto the cells of a coarser grid; coordinates become cell means.
struct PoolResult {
  nn::FeatureMap pooled;
  std::shared_ptr<const std::vector<int>> inverse_index;  // fine point -> pooled point
};

PoolResult grid_pool(const nn::FeatureMap& fm, double next_grid);

/// Broadcasts coarse features back onto the fine points and concatenates the skip features.
/// The caller projects the result to the stage width.
ad::Var grid_unpool(const nn::FeatureMap& coarse, const Coords& fine_coords, const std::vector<int>& inverse_index,
                    const nn::FeatureMap& skip);

struct EncodeResult {
  ad::Var per_point;  // N x out_dim at the input coordinates
  ad::Var tokens;     // bottleneck features
  std::shared_ptr<const Coords> token_locations;
  std::vector<double> stage_grids;
};

/// U-shaped encoder/decoder whose neighborhoods are normalized by stage grids derived from `base_grid`.
class Backbone {
 public:
  Backbone() = default;
  Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, Index in_channels, std::mt19937_64& rng);

  EncodeResult encode_decode(ad::Tape& tape, const PointCloud& pc, double base_grid) const;
  const BackboneConfig& config() const { return cfg_; }

 private:
  struct Transition {
    nn::Linear linear;
    nn::Norm norm;
  };

  BackboneConfig cfg_;
  Transition stem_;
  std::vector<std::vector<AggregateBlock>> enc_blocks_;
  std::vector<Transition> down_;
  std::vector<AggregateBlock> bottleneck_;
  std::vector<Transition> up_;
  std::vector<std::vector<AggregateBlock>> dec_blocks_;
  nn::Linear head_;
};

}  // namespace invaria
