#pragma once

#include "invaria/model.hpp"

#include <filesystem>
#include <optional>
#include <span>

namespace invaria {

class EmptyEvaluation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  /// Rows are ground truth, columns predictions; ignored ground truth is skipped.
  void add(std::span<const int> pred, std::span<const int> gt, int ignore_label = kIgnoreLabel);
  void merge(const ConfusionMatrix& other);

  int num_classes() const { return k_; }
  long long at(int gt, int pred) const { return counts_[static_cast<std::size_t>(gt * k_ + pred)]; }
  long long total() const;

 private:
  int k_;
  std::vector<long long> counts_;
};

struct Metrics {
  std::vector<double> iou;  // NaN for classes with no ground truth and no predictions
  std::vector<bool> present;
  double miou = 0.0;  // mean IoU over classes present in the ground truth
  double macc = 0.0;
  double allacc = 0.0;
};

Metrics metrics_from_confusion(const ConfusionMatrix& cm);
Metrics confusion_and_metrics(std::span<const int> pred, std::span<const int> gt, int num_classes,
                              int ignore_label = kIgnoreLabel);

/// Plain mean of a list of IoU values.
double mean_iou(std::span<const double> ious);

enum class Suite { kResolution, kScale, kDensity };
Suite parse_suite(std::string_view name);
std::string to_string(Suite s);

struct ShiftReport {
  Suite suite = Suite::kResolution;
  std::vector<double> settings;  // grid sizes, scale factors or fractions
  std::vector<Metrics> rows;
  std::vector<std::string> class_names;
};

struct EvalOptions {
  double sparse_fraction = 1.0;  // fraction of the input encoded by the backbone
  std::uint64_t seed = 0;
};

/// Voxelizes each scene at m * tau_star, segments, projects labels to the full
/// cloud and scores against the full-resolution labels. Confusion is pooled over scenes.
ShiftReport resolution_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes, double tau_star,
                                   std::span<const double> multipliers, const EvalOptions& opts = {});

/// Scales coordinates by each factor, segments and scores the scaled cloud.
/// `tau_star` voxelizes scenes before scaling when positive.
ShiftReport scale_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes,
                              std::span<const double> factors, double tau_star = 0.0, const EvalOptions& opts = {});

/// Subsamples each scene to ceil(f * N) points, segments and projects back to the full cloud.
ShiftReport density_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes,
                                std::span<const double> fractions, double tau_star = 0.0,
                                const EvalOptions& opts = {});

/// (IoU_base - IoU_worst) / IoU_base per class; nullopt where IoU_base is zero or undefined.
std::vector<std::optional<double>> per_class_drop(const ShiftReport& report, double base_setting,
                                                  double worst_setting);
std::vector<std::optional<double>> per_class_drop(std::span<const double> base_iou, std::span<const double> worst_iou);

std::vector<std::string> default_class_names(int num_classes);

/// setting,mIoU,mAcc,allAcc,<class IoU...>; values as fractions.
std::string report_csv(const ShiftReport& report);
/// class,base,worst,relative_drop
std::string drop_csv(const ShiftReport& report, double base_setting, double worst_setting);

}  // namespace invaria
