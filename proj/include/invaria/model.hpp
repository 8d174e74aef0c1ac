#pragma once

#include "invaria/backbone.hpp"
#include "invaria/calibration.hpp"
#include "invaria/config.hpp"
#include "invaria/predictor.hpp"

#include <filesystem>
#include <memory>

namespace invaria {

struct ModelConfig {
  int in_channels = 4;
  int num_classes = 5;
  BackboneConfig backbone;
  PredictorConfig predictor;
  bool use_rfc = true;
  bool use_nrp = true;
  double fixed_grid = 0.02;  // used for every input when use_rfc is off
  CalibrationConfig calibration;
  std::uint64_t init_seed = 0;

  void validate() const;

  /// Applies one `key = value` setting; returns false if the key is not a model key.
  bool apply(std::string_view key, std::string_view value);
  /// All keys understood by apply(), with their current values.
  KeyValues to_key_values() const;
};

/// Backbone, shared next-resolution predictor and a linear classifier.
class InvariaModel {
 public:
  explicit InvariaModel(const ModelConfig& cfg);
  InvariaModel(const InvariaModel&) = delete;
  InvariaModel& operator=(const InvariaModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const Backbone& backbone() const { return backbone_; }
  const Predictor& predictor() const { return predictor_; }

  /// Calibrated grid of `coords` with RFC on, the fixed grid otherwise.
  double base_grid(const Coords& coords) const;

  ad::Var classify(ad::Tape& tape, const ad::Var& feats) const;

  /// Per-point logits for `pc`. NRP models pass the decoder output through the
  /// predictor on the same coordinates before classification.
  ad::Var forward(ad::Tape& tape, const PointCloud& pc) const;

  /// Encodes `sparse`, predicts features at `dense_coords` and classifies them.
  /// Without NRP the labels are transferred from the sparse logits by nearest neighbor.
  ad::Var forward_to(ad::Tape& tape, const PointCloud& sparse, const Coords& dense_coords) const;

  std::vector<int> predict_labels(const PointCloud& pc) const;

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<InvariaModel> load(const std::filesystem::path& path);

 private:
  ModelConfig cfg_;
  nn::ParameterStore store_;
  Backbone backbone_;
  Predictor predictor_;
  nn::Linear classifier_;
};

std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace invaria
