#include "invaria/backbone.hpp"

#include "invaria/calibration.hpp"
#include "invaria/geometry.hpp"

#include <string>

namespace invaria {

void BackboneConfig::validate() const {
  const int s = num_stages();
  if (s < 1) throw std::invalid_argument("backbone: need at least one encoder stage");
  if (static_cast<int>(enc_depths.size()) != s) throw std::invalid_argument("backbone: enc_depths/enc_channels length");
  if (static_cast<int>(dec_depths.size()) != s - 1 || static_cast<int>(dec_channels.size()) != s - 1) {
    throw std::invalid_argument("backbone: decoder lists must have one entry per encoder stage minus one");
  }
  for (const int c : enc_channels) {
    if (c < 1) throw std::invalid_argument("backbone: channel widths must be positive");
  }
  for (const int c : dec_channels) {
    if (c < 1) throw std::invalid_argument("backbone: channel widths must be positive");
  }
  for (const int d : enc_depths) {
    if (d < 0) throw std::invalid_argument("backbone: depths must be non-negative");
  }
  for (const int d : dec_depths) {
    if (d < 0) throw std::invalid_argument("backbone: depths must be non-negative");
  }
  if (k_neighbors < 1) throw std::invalid_argument("backbone: k_neighbors must be >= 1");
  if (bottleneck_layers < 0) throw std::invalid_argument("backbone: bottleneck_layers must be >= 0");
  if (out_dim < 1) throw std::invalid_argument("backbone: out_dim must be >= 1");
}

BackboneConfig BackboneConfig::desk() { return BackboneConfig{}; }

BackboneConfig BackboneConfig::full_size() {
  BackboneConfig cfg;
  cfg.enc_depths = {2, 2, 2, 2, 1};
  cfg.enc_channels = {32, 64, 128, 256, 512};
  cfg.dec_depths = {2, 2, 2, 2};
  cfg.dec_channels = {64, 64, 128, 256};
  cfg.out_dim = 64;
  return cfg;
}

AggregateBlock::AggregateBlock(nn::ParameterStore& store, const std::string& name, Index channels,
                               nn::NormKind norm, std::mt19937_64& rng)
    : aggregate_(store, name + ".agg", channels, channels, rng),
      project_(store, name + ".proj", channels, channels, rng),
      norm_(store, name + ".norm", channels, norm) {}

nn::FeatureMap AggregateBlock::forward(ad::Tape& tape, const nn::FeatureMap& in,
                                       std::shared_ptr<const ad::EdgeSet> edges) const {
  const ad::Var h = aggregate_.forward(tape, in.feats, std::move(edges));
  const ad::Var residual = ad::add(in.feats, project_.forward(tape, h));
  return nn::FeatureMap{in.coords, norm_.forward(tape, residual), in.stage_grid};
}

nn::FeatureMap AggregateBlock::forward(ad::Tape& tape, const nn::FeatureMap& in, int k) const {
  return forward(tape, in, nn::build_edges(*in.coords, k, in.stage_grid));
}

PoolResult grid_pool(const nn::FeatureMap& fm, double next_grid) {
  if (!(next_grid > fm.stage_grid)) {
    throw std::invalid_argument("grid_pool: next grid " + std::to_string(next_grid) +
                                " must exceed the stage grid " + std::to_string(fm.stage_grid));
  }
  const GridAssignment cells = assign_grid_cells(*fm.coords, next_grid);
  auto inverse = std::make_shared<const std::vector<int>>(cells.inverse_index);
  PoolResult res;
  res.inverse_index = inverse;
  res.pooled.coords = std::make_shared<const Coords>(cell_means(*fm.coords, cells));
  res.pooled.feats = ad::segment_max(fm.feats, inverse, cells.num_cells);
  res.pooled.stage_grid = next_grid;
  return res;
}

ad::Var grid_unpool(const nn::FeatureMap& coarse, const Coords& fine_coords, const std::vector<int>& inverse_index,
                    const nn::FeatureMap& skip) {
  if (static_cast<Index>(inverse_index.size()) != fine_coords.rows()) {
    throw std::invalid_argument("grid_unpool: inverse index does not match fine point count");
  }
  if (skip.size() != fine_coords.rows() || skip.feats.rows() != fine_coords.rows()) {
    throw std::invalid_argument("grid_unpool: skip features do not match fine points");
  }
  for (const int c : inverse_index) {
    if (c < 0 || c >= coarse.feats.rows()) throw std::invalid_argument("grid_unpool: inverse index out of range");
  }
  const ad::Var broadcast = ad::gather_rows(coarse.feats, std::make_shared<const std::vector<int>>(inverse_index));
  return ad::concat_cols(broadcast, skip.feats);
}

Backbone::Backbone(nn::ParameterStore& store, const BackboneConfig& cfg, Index in_channels, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const int stages = cfg_.num_stages();
  const auto width = [&](int s) { return static_cast<Index>(cfg_.enc_channels[static_cast<std::size_t>(s)]); };

  stem_ = {nn::Linear(store, "backbone.stem", in_channels, width(0), rng),
           nn::Norm(store, "backbone.stem.norm", width(0), cfg_.norm)};
  for (int s = 0; s < stages; ++s) {
    std::vector<AggregateBlock> blocks;
    for (int d = 0; d < cfg_.enc_depths[static_cast<std::size_t>(s)]; ++d) {
      blocks.emplace_back(store, "backbone.enc" + std::to_string(s) + "." + std::to_string(d), width(s), cfg_.norm,
                          rng);
    }
    enc_blocks_.push_back(std::move(blocks));
    if (s + 1 < stages) {
      const std::string name = "backbone.down" + std::to_string(s);
      down_.push_back({nn::Linear(store, name, width(s), width(s + 1), rng),
                       nn::Norm(store, name + ".norm", width(s + 1), cfg_.norm)});
    }
  }
  for (int b = 0; b < cfg_.bottleneck_layers; ++b) {
    bottleneck_.emplace_back(store, "backbone.bottleneck" + std::to_string(b), width(stages - 1), cfg_.norm, rng);
  }
  // Decoder stages run coarse -> fine; index s refers to the encoder stage they restore.
  up_.resize(static_cast<std::size_t>(std::max(0, stages - 1)));
  dec_blocks_.resize(up_.size());
  for (int s = stages - 2; s >= 0; --s) {
    const Index coarse_width = s == stages - 2 ? width(stages - 1) : cfg_.dec_channels[static_cast<std::size_t>(s + 1)];
    const Index out_width = cfg_.dec_channels[static_cast<std::size_t>(s)];
    const std::string name = "backbone.up" + std::to_string(s);
    up_[static_cast<std::size_t>(s)] = {nn::Linear(store, name, coarse_width + width(s), out_width, rng),
                                        nn::Norm(store, name + ".norm", out_width, cfg_.norm)};
    for (int d = 0; d < cfg_.dec_depths[static_cast<std::size_t>(s)]; ++d) {
      dec_blocks_[static_cast<std::size_t>(s)].emplace_back(
          store, "backbone.dec" + std::to_string(s) + "." + std::to_string(d), out_width, cfg_.norm, rng);
    }
  }
  const Index final_width = stages > 1 ? cfg_.dec_channels[0] : width(0);
  head_ = nn::Linear(store, "backbone.head", final_width, cfg_.out_dim, rng);
}

EncodeResult Backbone::encode_decode(ad::Tape& tape, const PointCloud& pc, double base_grid) const {
  if (pc.size() < 1) throw std::invalid_argument("encode_decode: empty cloud");
  if (!(base_grid > 0.0)) throw std::invalid_argument("encode_decode: base grid must be positive");
  const int stages = cfg_.num_stages();
  EncodeResult res;
  res.stage_grids = stage_grid_sizes(base_grid, stages);

  nn::FeatureMap x;
  x.coords = std::make_shared<const Coords>(pc.coords);
  x.stage_grid = res.stage_grids[0];
  x.feats = stem_.norm.forward(tape, stem_.linear.forward(tape, tape.constant(pc.feats)));

  std::vector<nn::FeatureMap> skips;
  std::vector<std::shared_ptr<const std::vector<int>>> inverses;
  std::vector<std::shared_ptr<const ad::EdgeSet>> edges_per_stage;
  for (int s = 0; s < stages; ++s) {
    auto edges = nn::build_edges(*x.coords, cfg_.k_neighbors, x.stage_grid);
    edges_per_stage.push_back(edges);
    for (const AggregateBlock& block : enc_blocks_[static_cast<std::size_t>(s)]) x = block.forward(tape, x, edges);
    if (s + 1 < stages) {
      skips.push_back(x);
      PoolResult pooled = grid_pool(x, res.stage_grids[static_cast<std::size_t>(s + 1)]);
      inverses.push_back(pooled.inverse_index);
      x = pooled.pooled;
      const Transition& t = down_[static_cast<std::size_t>(s)];
      x.feats = t.norm.forward(tape, t.linear.forward(tape, x.feats));
    }
  }
  for (const AggregateBlock& block : bottleneck_) x = block.forward(tape, x, edges_per_stage.back());
  res.tokens = x.feats;
  res.token_locations = x.coords;

  for (int s = stages - 2; s >= 0; --s) {
    const nn::FeatureMap& skip = skips[static_cast<std::size_t>(s)];
    const ad::Var merged = grid_unpool(x, *skip.coords, *inverses[static_cast<std::size_t>(s)], skip);
    const Transition& t = up_[static_cast<std::size_t>(s)];
    x = nn::FeatureMap{skip.coords, t.norm.forward(tape, t.linear.forward(tape, merged)), skip.stage_grid};
    for (const AggregateBlock& block : dec_blocks_[static_cast<std::size_t>(s)]) {
      x = block.forward(tape, x, edges_per_stage[static_cast<std::size_t>(s)]);
    }
  }
  res.per_point = head_.forward(tape, x.feats);
  return res;
}

}  // namespace invaria
