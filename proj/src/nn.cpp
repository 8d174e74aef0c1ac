#include "invaria/nn.hpp"

#include "invaria/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace invaria::nn {

ad::Parameter& ParameterStore::add(std::string name, Matrix value, bool trainable) {
  if (find(name) != nullptr) throw std::logic_error("duplicate parameter name '" + name + "'");
  ad::Parameter& p = params_.emplace_back();
  p.name = std::move(name);
  p.value = std::move(value);
  p.trainable = trainable;
  p.zero_grad();
  return p;
}

ad::Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

const ad::Parameter* ParameterStore::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

Index ParameterStore::trainable_count() const {
  Index n = 0;
  for (const auto& p : params_) {
    if (p.trainable) n += p.value.size();
  }
  return n;
}

Matrix kaiming_uniform(Index fan_in, Index fan_out, std::mt19937_64& rng, double gain) {
  const double bound = gain * std::sqrt(6.0 / static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(fan_in, fan_out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

NormKind parse_norm(std::string_view name) {
  if (name == "layer") return NormKind::kLayer;
  if (name == "batch") return NormKind::kBatch;
  throw std::invalid_argument("unknown normalization '" + std::string(name) + "' (layer|batch)");
}

std::string to_string(NormKind n) { return n == NormKind::kLayer ? "layer" : "batch"; }

std::shared_ptr<const ad::EdgeSet> build_edges(const Coords& coords, int k, double grid) {
  if (coords.rows() < 1) throw std::invalid_argument("build_edges: empty point set");
  if (!(grid > 0.0)) throw std::invalid_argument("build_edges: grid must be positive");
  const int kk = static_cast<int>(std::min<Index>(k, coords.rows()));
  const kernels::NeighborTable table = knn(coords, coords, kk);
  auto edges = std::make_shared<ad::EdgeSet>();
  edges->k = kk;
  edges->nbr = table.indices;
  edges->rel.resize(coords.rows() * kk, 3);
  const Index p = coords.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < p; ++i) {
    for (int j = 0; j < kk; ++j) {
      const Index e = i * kk + j;
      const int n = edges->nbr[static_cast<std::size_t>(e)];
      for (int d = 0; d < 3; ++d) edges->rel(e, d) = (coords(n, d) - coords(i, d)) / grid;
    }
  }
  return edges;
}

Linear::Linear(ParameterStore& store, const std::string& name, Index in, Index out, std::mt19937_64& rng,
               bool zero_init) {
  weight_ = &store.add(name + ".weight", zero_init ? Matrix::Zero(in, out) : kaiming_uniform(in, out, rng, 1.0));
  bias_ = &store.add(name + ".bias", Matrix::Zero(1, out));
}

ad::Var Linear::forward(ad::Tape& tape, const ad::Var& x) const {
  return ad::add_row(ad::matmul(x, tape.parameter(*weight_)), tape.parameter(*bias_));
}

Norm::Norm(ParameterStore& store, const std::string& name, Index channels, NormKind kind) : kind_(kind) {
  gamma_ = &store.add(name + ".gamma", Matrix::Ones(1, channels));
  beta_ = &store.add(name + ".beta", Matrix::Zero(1, channels));
  if (kind == NormKind::kBatch) {
    running_mean_ = &store.add(name + ".running_mean", Matrix::Zero(1, channels), false);
    running_var_ = &store.add(name + ".running_var", Matrix::Ones(1, channels), false);
  }
}

ad::Var Norm::forward(ad::Tape& tape, const ad::Var& x) const {
  const ad::Var g = tape.parameter(*gamma_);
  const ad::Var b = tape.parameter(*beta_);
  if (kind_ == NormKind::kLayer) return ad::layer_norm(x, g, b);
  return ad::batch_norm(x, g, b, *running_mean_, *running_var_);
}

NeighborMax::NeighborMax(ParameterStore& store, const std::string& name, Index in, Index hidden,
                         std::mt19937_64& rng) {
  w_feat_ = &store.add(name + ".w_feat", kaiming_uniform(in + 3, hidden, rng).topRows(in));
  w_rel_ = &store.add(name + ".w_rel", kaiming_uniform(in + 3, hidden, rng).topRows(3));
  bias_ = &store.add(name + ".bias", Matrix::Zero(1, hidden));
}

ad::Var NeighborMax::forward(ad::Tape& tape, const ad::Var& feats, std::shared_ptr<const ad::EdgeSet> edges) const {
  const ad::Var u = ad::matmul(feats, tape.parameter(*w_feat_));
  return ad::edge_max_relu(u, tape.parameter(*w_rel_), tape.parameter(*bias_), std::move(edges));
}

}  // namespace invaria::nn
