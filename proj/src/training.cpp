#include "invaria/training.hpp"

#include "invaria/io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace invaria {

void TrainConfig::validate() const {
  if (!(peak_lr > 0.0)) throw std::invalid_argument("train: peak_lr must be positive");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be non-negative");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw std::invalid_argument("train: warmup_frac must be in (0, 1)");
  if (total_steps < 2) throw std::invalid_argument("train: total_steps must be >= 2");
  if (warmup_frac * total_steps >= total_steps - 1) {
    throw std::invalid_argument("train: warm-up leaves no decay phase");
  }
  if (n0 < 1) throw std::invalid_argument("train: n0 must be >= 1");
  if (h < 2) throw std::invalid_argument("train: h must be >= 2");
  if (!(loss_weights.beta >= 0.0)) throw std::invalid_argument("train: beta must be non-negative");
  if (checkpoint_every < 0) throw std::invalid_argument("train: checkpoint_every must be >= 0");
}

bool TrainConfig::apply(std::string_view key, std::string_view value) {
  if (key == "peak_lr") peak_lr = kv::to_double(key, value);
  else if (key == "weight_decay") weight_decay = kv::to_double(key, value);
  else if (key == "warmup_frac") warmup_frac = kv::to_double(key, value);
  else if (key == "total_steps") total_steps = kv::to_int(key, value);
  else if (key == "n0") n0 = kv::to_int64(key, value);
  else if (key == "h") h = kv::to_int(key, value);
  else if (key == "lambdas") loss_weights.lambdas = kv::to_double_list(key, value);
  else if (key == "beta") loss_weights.beta = kv::to_double(key, value);
  else if (key == "schedule") loss_weights.schedule = parse_schedule(value);
  else if (key == "seed") seed = static_cast<std::uint64_t>(kv::to_int64(key, value));
  else if (key == "use_align") use_align = kv::to_bool(key, value);
  else if (key == "checkpoint_every") checkpoint_every = kv::to_int(key, value);
  else return false;
  return true;
}

KeyValues TrainConfig::to_key_values() const {
  KeyValues out;
  out["peak_lr"] = kv::format_double(peak_lr);
  out["weight_decay"] = kv::format_double(weight_decay);
  out["warmup_frac"] = kv::format_double(warmup_frac);
  out["total_steps"] = std::to_string(total_steps);
  out["n0"] = std::to_string(n0);
  out["h"] = std::to_string(h);
  out["lambdas"] = kv::format_list(loss_weights.lambdas);
  out["beta"] = kv::format_double(loss_weights.beta);
  out["schedule"] = to_string(loss_weights.schedule);
  out["seed"] = std::to_string(seed);
  out["use_align"] = use_align ? "true" : "false";
  out["checkpoint_every"] = std::to_string(checkpoint_every);
  return out;
}

void RunConfig::apply(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (!model.apply(key, value) && !train.apply(key, value)) {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  }
}

RunConfig RunConfig::from_file(const std::string& path) {
  RunConfig cfg;
  try {
    cfg.apply(load_key_values(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
  return cfg;
}

double lr_at(int step, const TrainConfig& cfg) {
  if (step < 0 || step >= cfg.total_steps) {
    throw std::invalid_argument("lr_at: step " + std::to_string(step) + " outside [0, " +
                                std::to_string(cfg.total_steps) + ")");
  }
  const double warm = cfg.warmup_frac * cfg.total_steps;
  const double s = step;
  if (s <= warm) return cfg.peak_lr * s / warm;
  const double span = (cfg.total_steps - 1) - warm;
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * (s - warm) / span));
}

AdamW::AdamW(nn::ParameterStore& store, double weight_decay, double beta1, double beta2, double eps)
    : wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (ad::Parameter& p : store.all()) {
    if (!p.trainable) continue;
    slots_.push_back({&p, Matrix::Zero(p.value.rows(), p.value.cols()), Matrix::Zero(p.value.rows(), p.value.cols())});
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (Slot& s : slots_) {
    Matrix& w = s.param->value;
    const Matrix& g = s.param->grad;
    w *= 1.0 - lr * wd_;
    s.m = beta1_ * s.m + (1.0 - beta1_) * g;
    s.v = beta2_ * s.v + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  }
}

ResolutionPyramid training_pyramid(const PointCloud& pc, Index n0, int h, std::uint64_t seed) {
  ResolutionPyramid pyr = build_pyramid(pc, n0, h, seed);
  pyr.levels.push_back(pc);
  pyr.cardinalities.push_back(pc.size());
  return pyr;
}

namespace {

std::shared_ptr<const std::vector<int>> shared_labels(const PointCloud& pc) {
  if (!pc.has_labels()) throw std::invalid_argument("training cloud has no labels");
  return std::make_shared<const std::vector<int>>(pc.labels);
}

}  // namespace

StepLoss build_step_loss(ad::Tape& tape, const InvariaModel& model, const ResolutionPyramid& pyramid,
                         const TrainConfig& cfg) {
  const int m_levels = pyramid.depth();
  if (m_levels < 1) throw std::invalid_argument("training step needs at least one level");
  const ModelConfig& mc = model.config();
  std::vector<ad::Var> ce_terms, ls_terms;
  std::vector<ad::Var> tokens;
  std::vector<TokenSet> token_sets;

  if (!mc.use_nrp) {
    const PointCloud& finest = pyramid.levels.back();
    const ad::Var logits = model.forward(tape, finest);
    const auto labels = shared_labels(finest);
    ce_terms.push_back(ad::cross_entropy(logits, labels));
    ls_terms.push_back(ad::lovasz_softmax(ad::softmax_rows(logits), labels));
  } else {
    if (m_levels < 2) throw std::invalid_argument("NRP training needs at least two levels");
    for (int m = 0; m + 1 < m_levels; ++m) {
      const PointCloud& level = pyramid.levels[static_cast<std::size_t>(m)];
      const PointCloud& next = pyramid.levels[static_cast<std::size_t>(m + 1)];
      const double grid = model.base_grid(level.coords);
      const EncodeResult enc = model.backbone().encode_decode(tape, level, grid);
      const nn::FeatureMap sparse{std::make_shared<const Coords>(level.coords), enc.per_point, grid};
      auto dense = std::make_shared<const Coords>(next.coords);
      const double dense_grid = model.base_grid(*dense);
      const nn::FeatureMap pred = model.predictor().predict_next_resolution(tape, sparse, dense, dense_grid);
      const ad::Var logits = model.classify(tape, pred.feats);
      const auto labels = shared_labels(next);
      ce_terms.push_back(ad::cross_entropy(logits, labels));
      ls_terms.push_back(ad::lovasz_softmax(ad::softmax_rows(logits), labels));
      tokens.push_back(enc.tokens);
      token_sets.push_back(TokenSet{enc.tokens.value(), *enc.token_locations});
    }
  }

  const int supervised = static_cast<int>(ce_terms.size());
  const std::vector<double> lambdas = cfg.loss_weights.resolve(supervised);
  const double beta = cfg.use_align ? cfg.loss_weights.beta : 0.0;

  StepLoss out;
  std::vector<ad::Var> terms;
  std::vector<double> weights;
  for (int m = 0; m < supervised; ++m) {
    const double lam = lambdas[static_cast<std::size_t>(m)];
    out.parts.ce += lam * ce_terms[static_cast<std::size_t>(m)].scalar();
    out.parts.ls += lam * ls_terms[static_cast<std::size_t>(m)].scalar();
    terms.push_back(ce_terms[static_cast<std::size_t>(m)]);
    terms.push_back(ls_terms[static_cast<std::size_t>(m)]);
    weights.push_back(lam);
    weights.push_back(lam);
  }
  if (beta > 0.0 && tokens.size() >= 2) {
    auto matches = std::make_shared<const std::vector<ad::AlignmentMatch>>(match_token_sets(token_sets));
    const ad::Var align = ad::alignment(tokens, matches, static_cast<int>(tokens.size()));
    out.parts.align = align.scalar();
    terms.push_back(align);
    weights.push_back(beta);
  }
  out.parts.total = out.parts.ce + out.parts.ls + beta * out.parts.align;
  out.total = ad::weighted_sum(terms, weights);
  return out;
}

Trainer::Trainer(InvariaModel& model, const TrainConfig& cfg)
    : model_(model), cfg_(cfg), opt_(model.parameters(), cfg.weight_decay) {
  cfg_.validate();
}

LossBreakdown Trainer::train_step(const ResolutionPyramid& pyramid) {
  const double lr = lr_at(step_, cfg_);
  model_.parameters().zero_grad();
  LossBreakdown parts;
  {
    ad::Tape tape(/*record=*/true, /*training=*/true);
    StepLoss loss = build_step_loss(tape, model_, pyramid, cfg_);
    if (!std::isfinite(loss.parts.total)) {
      throw std::runtime_error("non-finite loss at step " + std::to_string(step_));
    }
    tape.backward(loss.total);
    parts = loss.parts;
  }
  opt_.step(lr);
  ++step_;
  return parts;
}

LossBreakdown fit(InvariaModel& model, const std::vector<PointCloud>& scenes, const TrainConfig& cfg,
                  const FitOptions& opts) {
  if (scenes.empty()) throw std::invalid_argument("fit: empty dataset");
  Trainer trainer(model, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(scenes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t cursor = order.size();

  std::string log = "step,lr,loss_total,loss_ce,loss_ls,loss_align\n";
  const auto flush = [&] {
    if (opts.log_csv) write_file_atomic(*opts.log_csv, log);
    if (opts.checkpoint) model.save(*opts.checkpoint);
  };

  LossBreakdown last;
  for (int step = 0; step < cfg.total_steps; ++step) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const PointCloud& scene = scenes[order[cursor++]];
    const std::uint64_t pyr_seed = cfg.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(step) + 1;
    const ResolutionPyramid pyr = model.config().use_nrp ? training_pyramid(scene, cfg.n0, cfg.h, pyr_seed)
                                                         : ResolutionPyramid{{scene}, {scene.size()}};
    const double lr = lr_at(step, cfg);
    last = trainer.train_step(pyr);
    char row[256];
    std::snprintf(row, sizeof row, "%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", step, lr, last.total, last.ce, last.ls,
                  last.align);
    log += row;
    if (opts.on_step) opts.on_step(step, last);
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.total_steps) flush();
  }
  flush();
  return last;
}

}  // namespace invaria
