#pragma once

#include "invaria/model.hpp"

namespace invaria {

/// Receptive-field reach of a k-neighbor operator at grid tau: tau * k^(1/3).
double reach(double tau, int k);

struct AsymmetricStats {
  Index backbone_points = 0;
  Index full_points = 0;
  double token_reduction = 0.0;  // 1 - sparse_fraction
  bool model_has_nrp = true;
};

struct AsymmetricResult {
  std::vector<int> labels;
  AsymmetricStats stats;
};

/// Encodes ceil(sparse_fraction * N) points and labels every point of `pc`.
/// sparse_fraction = 1 runs the symmetric pipeline on `pc` unchanged.
AsymmetricResult asymmetric_segment(const PointCloud& pc, const InvariaModel& model, double sparse_fraction,
                                    std::uint64_t seed);

/// Nearest-neighbor label transfer (lowest index wins ties).
std::vector<int> project_labels(const PointCloud& source, const Coords& target_coords);

}  // namespace invaria
