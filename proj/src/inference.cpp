#include "invaria/inference.hpp"

#include "invaria/geometry.hpp"

#include <cmath>

namespace invaria {

double reach(double tau, int k) {
  if (!(tau > 0.0)) throw std::invalid_argument("reach: tau must be positive");
  if (k < 1) throw std::invalid_argument("reach: k must be >= 1");
  return tau * std::cbrt(static_cast<double>(k));
}

AsymmetricResult asymmetric_segment(const PointCloud& pc, const InvariaModel& model, double sparse_fraction,
                                    std::uint64_t seed) {
  if (!(sparse_fraction > 0.0 && sparse_fraction <= 1.0)) {
    throw std::invalid_argument("asymmetric_segment: sparse_fraction must be in (0, 1]");
  }
  if (pc.size() < 1) throw std::invalid_argument("asymmetric_segment: empty cloud");
  AsymmetricResult res;
  res.stats.full_points = pc.size();
  res.stats.token_reduction = 1.0 - sparse_fraction;
  res.stats.model_has_nrp = model.config().use_nrp;

  const auto n = static_cast<Index>(std::ceil(sparse_fraction * static_cast<double>(pc.size()) - 1e-9));
  if (n >= pc.size()) {
    res.stats.backbone_points = pc.size();
    res.labels = model.predict_labels(pc);
    return res;
  }
  const PointCloud sparse = subsample(pc, std::max<Index>(n, 2), seed);
  res.stats.backbone_points = sparse.size();
  ad::Tape tape(/*record=*/false, /*training=*/false);
  res.labels = argmax_rows(model.forward_to(tape, sparse, pc.coords).value());
  return res;
}

std::vector<int> project_labels(const PointCloud& source, const Coords& target_coords) {
  if (source.size() < 1) throw std::invalid_argument("project_labels: empty source");
  if (!source.has_labels()) throw std::invalid_argument("project_labels: source has no labels");
  const std::vector<int> nearest = nearest_indices(target_coords, source.coords);
  std::vector<int> out(nearest.size());
  for (std::size_t i = 0; i < nearest.size(); ++i) out[i] = source.labels[static_cast<std::size_t>(nearest[i])];
  return out;
}

}  // namespace invaria
