#include "invaria/predictor.hpp"

#include "invaria/geometry.hpp"

#include <bit>
#include <cmath>
#include <unordered_set>

namespace invaria {

void PredictorConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("predictor: n_layers must be >= 1");
  if (channels < 1) throw std::invalid_argument("predictor: channels must be >= 1");
  if (refine_k < 1) throw std::invalid_argument("predictor: refine_k must be >= 1");
}

namespace {

struct BitKey {
  std::uint64_t x, y, z;
  bool operator==(const BitKey&) const = default;
};

struct BitKeyHash {
  std::size_t operator()(const BitKey& k) const noexcept {
    std::uint64_t h = k.x * 0x9E3779B97F4A7C15ULL;
    h ^= k.y + 0x517CC1B727220A95ULL + (h << 6) + (h >> 2);
    h ^= k.z * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

BitKey key_of(const Coords& c, Index i) {
  // +0.0 and -0.0 compare equal, so normalize before taking the bit pattern.
  const auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v == 0.0 ? 0.0 : v); };
  return {bits(c(i, 0)), bits(c(i, 1)), bits(c(i, 2))};
}

}  // namespace

Coords densify_coords(const Coords& sparse, const Coords* target, std::optional<double> ratio, std::uint64_t seed) {
  if ((target != nullptr) == ratio.has_value()) {
    throw std::invalid_argument("densify_coords: provide exactly one of target coordinates or ratio");
  }
  if (target) {
    std::unordered_set<BitKey, BitKeyHash> have;
    have.reserve(static_cast<std::size_t>(target->rows()));
    for (Index i = 0; i < target->rows(); ++i) have.insert(key_of(*target, i));
    for (Index i = 0; i < sparse.rows(); ++i) {
      if (!have.contains(key_of(sparse, i))) {
        throw std::invalid_argument("densify_coords: target coordinates do not contain sparse point " +
                                    std::to_string(i));
      }
    }
    return *target;
  }
  const double r = *ratio;
  if (!(r > 1.0)) throw std::invalid_argument("densify_coords: ratio must exceed 1");
  const Index p = sparse.rows();
  if (p < 2) throw std::invalid_argument("densify_coords: interpolation needs at least 2 sparse points");
  const auto extra = static_cast<Index>(std::ceil((r - 1.0) * static_cast<double>(p) - 1e-9));
  const int k = static_cast<int>(std::min<Index>(4, p));
  const kernels::NeighborTable table = knn(sparse, sparse, k);

  Coords out(p + extra, 3);
  out.topRows(p) = sparse;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> pick_point(0, p - 1);
  for (Index e = 0; e < extra; ++e) {
    const Index a = pick_point(rng);
    std::vector<int> candidates;
    for (int j = 0; j < k && candidates.size() < 3; ++j) {
      const int n = table.index(a, j);
      if (n != a) candidates.push_back(n);
    }
    std::uniform_int_distribution<std::size_t> pick_nbr(0, candidates.size() - 1);
    const int b = candidates[pick_nbr(rng)];
    out.row(p + e) = 0.5 * (sparse.row(a) + sparse.row(b));
  }
  return out;
}

nn::FeatureMap init_features_nn(const nn::FeatureMap& sparse, std::shared_ptr<const Coords> dense_coords,
                                double dense_grid) {
  if (sparse.size() < 1) throw std::invalid_argument("init_features_nn: empty sparse feature map");
  auto source = std::make_shared<const std::vector<int>>(nearest_indices(*dense_coords, *sparse.coords));
  return nn::FeatureMap{std::move(dense_coords), ad::gather_rows(sparse.feats, source), dense_grid};
}

RefineBlock::RefineBlock(nn::ParameterStore& store, const std::string& name, Index channels, nn::NormKind norm,
                         std::mt19937_64& rng)
    : aggregate_(store, name + ".agg", channels, channels, rng),
      norm_(store, name + ".norm", channels, norm),
      fc1_(store, name + ".fc1", channels, channels, rng),
      fc2_(store, name + ".fc2", channels, channels, rng, /*zero_init=*/true) {}

nn::FeatureMap RefineBlock::forward(ad::Tape& tape, const nn::FeatureMap& in,
                                    std::shared_ptr<const ad::EdgeSet> edges) const {
  const ad::Var h = norm_.forward(tape, aggregate_.forward(tape, in.feats, std::move(edges)));
  const ad::Var delta = fc2_.forward(tape, ad::relu(fc1_.forward(tape, h)));
  return nn::FeatureMap{in.coords, ad::add(in.feats, delta), in.stage_grid};
}

Predictor::Predictor(nn::ParameterStore& store, const PredictorConfig& cfg, std::mt19937_64& rng) : cfg_(cfg) {
  cfg_.validate();
  for (int l = 0; l < cfg_.n_layers; ++l) {
    blocks_.emplace_back(store, "predictor.refine" + std::to_string(l), cfg_.channels, cfg_.norm, rng);
  }
}

nn::FeatureMap Predictor::refine(ad::Tape& tape, const nn::FeatureMap& fm) const {
  if (fm.size() < 1) throw std::invalid_argument("refine: empty feature map");
  if (fm.feats.cols() != cfg_.channels) throw std::invalid_argument("refine: feature width != predictor channels");
  auto edges = nn::build_edges(*fm.coords, cfg_.refine_k, fm.stage_grid);
  nn::FeatureMap x = fm;
  for (const RefineBlock& block : blocks_) x = block.forward(tape, x, edges);
  return x;
}

nn::FeatureMap Predictor::predict_next_resolution(ad::Tape& tape, const nn::FeatureMap& sparse,
                                                  std::shared_ptr<const Coords> dense_coords,
                                                  double dense_grid) const {
  return refine(tape, init_features_nn(sparse, std::move(dense_coords), dense_grid));
}

}  // namespace invaria
