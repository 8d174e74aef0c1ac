#pragma once

#include "invaria/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace invaria {

enum class Reduction { kMean, kMin, kMedian };

Reduction parse_reduction(std::string_view name);
std::string to_string(Reduction r);

/// Receptive-field calibration settings. `anchors == kAllAnchors` uses every point.
struct CalibrationConfig {
  static constexpr Index kAllAnchors = -1;

  Index anchors = 1024;
  double alpha = 1.0;
  Reduction reduction = Reduction::kMean;
  std::uint64_t seed = 0;

  static CalibrationConfig all_points(double alpha = 1.0, Reduction r = Reduction::kMean) {
    return CalibrationConfig{kAllAnchors, alpha, r, 0};
  }
};

struct CalibrationResult {
  double grid = 0.0;
  std::vector<int> anchors;
  std::vector<double> distances;  // nearest distinct-point distance per anchor
};

/// Internal grid size alpha * reduce({d_i}) where d_i is the distance from
/// anchor i to its nearest point with a different index.
CalibrationResult calibrate(const Coords& coords, const CalibrationConfig& cfg);

inline double calibrate_grid_size(const Coords& coords, const CalibrationConfig& cfg) {
  return calibrate(coords, cfg).grid;
}

/// [base * factor^s for s in 0..num_stages-1].
std::vector<double> stage_grid_sizes(double base, int num_stages, double factor = 2.0);

}  // namespace invaria
