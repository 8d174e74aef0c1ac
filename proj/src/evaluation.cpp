#include "invaria/evaluation.hpp"

#include "invaria/geometry.hpp"
#include "invaria/inference.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace invaria {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(num_classes), 0);
}

void ConfusionMatrix::add(std::span<const int> pred, std::span<const int> gt, int ignore_label) {
  if (pred.size() != gt.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gt.size()) + " labels");
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_label) continue;
    if (gt[i] < 0 || gt[i] >= k_ || pred[i] < 0 || pred[i] >= k_) {
      throw std::invalid_argument("confusion: label out of range at point " + std::to_string(i));
    }
    ++counts_[static_cast<std::size_t>(gt[i] * k_ + pred[i])];
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw std::invalid_argument("confusion: class count mismatch in merge");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

long long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0LL); }

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  const int k = cm.num_classes();
  const long long total = cm.total();
  if (total == 0) throw EmptyEvaluation("evaluation has no labeled points");
  Metrics m;
  m.iou.assign(static_cast<std::size_t>(k), std::numeric_limits<double>::quiet_NaN());
  m.present.assign(static_cast<std::size_t>(k), false);
  long long correct = 0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    long long gt_c = 0, pred_c = 0;
    for (int j = 0; j < k; ++j) {
      gt_c += cm.at(c, j);
      pred_c += cm.at(j, c);
    }
    const long long tp = cm.at(c, c);
    correct += tp;
    const long long denom = gt_c + pred_c - tp;
    if (denom > 0) m.iou[static_cast<std::size_t>(c)] = static_cast<double>(tp) / static_cast<double>(denom);
    if (gt_c > 0) {
      m.present[static_cast<std::size_t>(c)] = true;
      ++present;
      m.miou += m.iou[static_cast<std::size_t>(c)];
      m.macc += static_cast<double>(tp) / static_cast<double>(gt_c);
    }
  }
  m.miou /= present;
  m.macc /= present;
  m.allacc = static_cast<double>(correct) / static_cast<double>(total);
  return m;
}

Metrics confusion_and_metrics(std::span<const int> pred, std::span<const int> gt, int num_classes, int ignore_label) {
  ConfusionMatrix cm(num_classes);
  cm.add(pred, gt, ignore_label);
  return metrics_from_confusion(cm);
}

double mean_iou(std::span<const double> ious) {
  if (ious.empty()) throw std::invalid_argument("mean_iou: no values");
  return std::accumulate(ious.begin(), ious.end(), 0.0) / static_cast<double>(ious.size());
}

Suite parse_suite(std::string_view name) {
  if (name == "resolution") return Suite::kResolution;
  if (name == "scale") return Suite::kScale;
  if (name == "density") return Suite::kDensity;
  throw std::invalid_argument("unknown suite '" + std::string(name) + "' (resolution|scale|density)");
}

std::string to_string(Suite s) {
  switch (s) {
    case Suite::kResolution: return "resolution";
    case Suite::kScale: return "scale";
    case Suite::kDensity: return "density";
  }
  return "?";
}

std::vector<std::string> default_class_names(int num_classes) {
  static const char* kNames[] = {"floor", "wall", "table", "chair", "clutter"};
  std::vector<std::string> out;
  for (int c = 0; c < num_classes; ++c) {
    out.push_back(num_classes == 5 ? kNames[c] : "class" + std::to_string(c));
  }
  return out;
}

namespace {

std::vector<int> segment(const InvariaModel& model, const PointCloud& pc, const EvalOptions& opts) {
  return asymmetric_segment(pc, model, opts.sparse_fraction, opts.seed).labels;
}

ShiftReport make_report(const InvariaModel& model, Suite suite, std::span<const double> settings) {
  if (settings.empty()) throw std::invalid_argument(to_string(suite) + " suite: no settings");
  ShiftReport r;
  r.suite = suite;
  r.settings.assign(settings.begin(), settings.end());
  r.class_names = default_class_names(model.config().num_classes);
  return r;
}

PointCloud at_resolution(const PointCloud& scene, double grid) {
  return grid > 0.0 ? voxelize(scene, grid).pooled : scene;
}

}  // namespace

ShiftReport resolution_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes, double tau_star,
                                   std::span<const double> multipliers, const EvalOptions& opts) {
  if (!(tau_star > 0.0)) throw std::invalid_argument("resolution suite: tau_star must be positive");
  ShiftReport r = make_report(model, Suite::kResolution, multipliers);
  for (double& s : r.settings) s *= tau_star;
  for (const double grid : r.settings) {
    ConfusionMatrix cm(model.config().num_classes);
    for (const PointCloud& scene : scenes) {
      PointCloud shifted = voxelize(scene, grid).pooled;
      shifted.labels = segment(model, shifted, opts);
      cm.add(project_labels(shifted, scene.coords), scene.labels);
    }
    r.rows.push_back(metrics_from_confusion(cm));
  }
  return r;
}

ShiftReport scale_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes,
                              std::span<const double> factors, double tau_star, const EvalOptions& opts) {
  ShiftReport r = make_report(model, Suite::kScale, factors);
  std::vector<PointCloud> base;
  for (const PointCloud& scene : scenes) base.push_back(at_resolution(scene, tau_star));
  for (const double f : factors) {
    ConfusionMatrix cm(model.config().num_classes);
    for (const PointCloud& scene : base) {
      const PointCloud scaled = apply_scale(scene, f);
      cm.add(segment(model, scaled, opts), scaled.labels);
    }
    r.rows.push_back(metrics_from_confusion(cm));
  }
  return r;
}

ShiftReport density_shift_suite(const InvariaModel& model, std::span<const PointCloud> scenes,
                                std::span<const double> fractions, double tau_star, const EvalOptions& opts) {
  ShiftReport r = make_report(model, Suite::kDensity, fractions);
  std::vector<PointCloud> base;
  for (const PointCloud& scene : scenes) base.push_back(at_resolution(scene, tau_star));
  for (const double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("density suite: fractions must be in (0, 1]");
    ConfusionMatrix cm(model.config().num_classes);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const PointCloud& scene = base[i];
      const auto n = static_cast<Index>(std::ceil(f * static_cast<double>(scene.size()) - 1e-9));
      if (n >= scene.size()) {
        cm.add(segment(model, scene, opts), scene.labels);
        continue;
      }
      PointCloud sparse = subsample(scene, std::max<Index>(n, 2), opts.seed + i);
      sparse.labels = segment(model, sparse, opts);
      cm.add(project_labels(sparse, scene.coords), scene.labels);
    }
    r.rows.push_back(metrics_from_confusion(cm));
  }
  return r;
}

std::vector<std::optional<double>> per_class_drop(std::span<const double> base_iou, std::span<const double> worst_iou) {
  if (base_iou.size() != worst_iou.size()) throw std::invalid_argument("per_class_drop: class count mismatch");
  std::vector<std::optional<double>> out(base_iou.size());
  for (std::size_t c = 0; c < base_iou.size(); ++c) {
    if (std::isnan(base_iou[c]) || std::isnan(worst_iou[c]) || base_iou[c] == 0.0) continue;
    out[c] = (base_iou[c] - worst_iou[c]) / base_iou[c];
  }
  return out;
}

namespace {

std::size_t find_setting(const ShiftReport& report, double setting) {
  for (std::size_t i = 0; i < report.settings.size(); ++i) {
    if (std::abs(report.settings[i] - setting) <= 1e-12 * std::max(1.0, std::abs(setting))) return i;
  }
  throw std::invalid_argument("setting " + std::to_string(setting) + " not in the " + to_string(report.suite) +
                              " report");
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_setting(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<std::optional<double>> per_class_drop(const ShiftReport& report, double base_setting,
                                                  double worst_setting) {
  const std::size_t b = find_setting(report, base_setting);
  const std::size_t w = find_setting(report, worst_setting);
  return per_class_drop(report.rows[b].iou, report.rows[w].iou);
}

std::string report_csv(const ShiftReport& report) {
  std::string out = "setting,mIoU,mAcc,allAcc";
  for (const std::string& name : report.class_names) out += "," + name;
  out += '\n';
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const Metrics& m = report.rows[i];
    out += fmt_setting(report.settings[i]) + "," + fmt(m.miou) + "," + fmt(m.macc) + "," + fmt(m.allacc);
    for (const double v : m.iou) out += "," + fmt(v);
    out += '\n';
  }
  return out;
}

std::string drop_csv(const ShiftReport& report, double base_setting, double worst_setting) {
  const std::size_t b = find_setting(report, base_setting);
  const std::size_t w = find_setting(report, worst_setting);
  const auto drops = per_class_drop(report.rows[b].iou, report.rows[w].iou);
  std::string out = "class,base,worst,relative_drop\n";
  for (std::size_t c = 0; c < drops.size(); ++c) {
    out += report.class_names[c] + "," + fmt(report.rows[b].iou[c]) + "," + fmt(report.rows[w].iou[c]) + "," +
           (drops[c] ? fmt(*drops[c]) : std::string("undefined")) + "\n";
  }
  return out;
}

}  // namespace invaria
