#pragma once

#include "invaria/geometry.hpp"
#include "invaria/losses.hpp"
#include "invaria/model.hpp"

#include <filesystem>
#include <functional>
#include <optional>

namespace invaria {

struct TrainConfig {
  double peak_lr = 0.006;
  double weight_decay = 0.05;
  double warmup_frac = 0.1;
  int total_steps = 300;
  Index n0 = 4096;
  int h = 4;
  LossWeights loss_weights;
  std::uint64_t seed = 0;
  bool use_align = true;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint

  void validate() const;
  bool apply(std::string_view key, std::string_view value);
  KeyValues to_key_values() const;
};

/// Model and training settings read from one flat config file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  /// Unknown keys are an error.
  void apply(const KeyValues& values);
  static RunConfig from_file(const std::string& path);
};

/// Linear warm-up to peak over warmup_frac * total_steps, then cosine decay to zero at the last step.
double lr_at(int step, const TrainConfig& cfg);

/// Adam moments with weight decay applied directly to the parameters.
class AdamW {
 public:
  AdamW(nn::ParameterStore& store, double weight_decay, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(double lr);
  long long steps_taken() const { return t_; }

 private:
  struct Slot {
    ad::Parameter* param;
    Matrix m;
    Matrix v;
  };
  std::vector<Slot> slots_;
  double wd_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

/// The chain of clouds a training step runs over: pyramid levels coarse -> fine, then the cloud itself.
ResolutionPyramid training_pyramid(const PointCloud& pc, Index n0, int h, std::uint64_t seed);

/// Builds the loss of one training step on the tape. With NRP every level but the last
/// is encoded and predicts the next level; without NRP only the finest level is used.
struct StepLoss {
  ad::Var total;
  LossBreakdown parts;
};
StepLoss build_step_loss(ad::Tape& tape, const InvariaModel& model, const ResolutionPyramid& pyramid,
                         const TrainConfig& cfg);

class Trainer {
 public:
  Trainer(InvariaModel& model, const TrainConfig& cfg);

  /// One optimizer update at the current step; returns the loss before the update.
  LossBreakdown train_step(const ResolutionPyramid& pyramid);
  int step() const { return step_; }

 private:
  InvariaModel& model_;
  TrainConfig cfg_;
  AdamW opt_;
  int step_ = 0;
};

struct FitOptions {
  std::optional<std::filesystem::path> checkpoint = {};
  std::optional<std::filesystem::path> log_csv = {};
  std::function<void(int step, const LossBreakdown&)> on_step = {};
};

/// Runs total_steps updates over shuffled scenes. Returns the final-step losses.
LossBreakdown fit(InvariaModel& model, const std::vector<PointCloud>& scenes, const TrainConfig& cfg,
                  const FitOptions& opts = {});

}  // namespace invaria
