#include "invaria/calibration.hpp"

#include "invaria/geometry.hpp"
#include "invaria/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace invaria {

Reduction parse_reduction(std::string_view name) {
  if (name == "mean") return Reduction::kMean;
  if (name == "min") return Reduction::kMin;
  if (name == "median") return Reduction::kMedian;
  throw std::invalid_argument("unknown reduction '" + std::string(name) + "' (mean|min|median)");
}

std::string to_string(Reduction r) {
  switch (r) {
    case Reduction::kMean:
      return "mean";
    case Reduction::kMin:
      return "min";
    case Reduction::kMedian:
      return "median";
  }
  return "mean";
}

namespace {

double reduce(std::vector<double> values, Reduction r) {
  switch (r) {
    case Reduction::kMin:
      return *std::min_element(values.begin(), values.end());
    case Reduction::kMedian: {
      std::sort(values.begin(), values.end());
      const std::size_t n = values.size();
      return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    }
    case Reduction::kMean:
      break;
  }
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace

CalibrationResult calibrate(const Coords& coords, const CalibrationConfig& cfg) {
  if (coords.rows() < 2) throw std::invalid_argument("calibrate: need at least 2 points");
  if (!(cfg.alpha > 0.0)) throw std::invalid_argument("calibrate: alpha must be positive");
  if (cfg.anchors != CalibrationConfig::kAllAnchors && cfg.anchors < 1) {
    throw std::invalid_argument("calibrate: anchor count must be >= 1");
  }

  CalibrationResult res;
  if (cfg.anchors == CalibrationConfig::kAllAnchors || cfg.anchors >= coords.rows()) {
    res.anchors.resize(static_cast<std::size_t>(coords.rows()));
    std::iota(res.anchors.begin(), res.anchors.end(), 0);
  } else {
    res.anchors = sample_indices(coords.rows(), cfg.anchors, cfg.seed);
  }
  res.distances = kernels::nearest_distinct_parallel(coords, res.anchors);
  const double reduced = reduce(res.distances, cfg.reduction);
  if (!(reduced > 0.0)) {
    throw DegenerateGeometry("calibrate: reduced nearest-neighbor distance is zero (duplicated points)");
  }
  res.grid = cfg.alpha * reduced;
  return res;
}

std::vector<double> stage_grid_sizes(double base, int num_stages, double factor) {
  if (!(base > 0.0)) throw std::invalid_argument("stage_grid_sizes: base must be positive");
  if (num_stages < 1) throw std::invalid_argument("stage_grid_sizes: need at least one stage");
  if (!(factor > 1.0)) throw std::invalid_argument("stage_grid_sizes: factor must exceed 1");
  std::vector<double> out(static_cast<std::size_t>(num_stages));
  double g = base;
  for (auto& v : out) {
    v = g;
    g *= factor;
  }
  return out;
}

}  // namespace invaria
