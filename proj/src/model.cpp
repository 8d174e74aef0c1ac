#include "invaria/model.hpp"

#include "invaria/geometry.hpp"
#include "invaria/io.hpp"

#include <cstring>
#include <sstream>

namespace invaria {

namespace {

constexpr std::string_view kCheckpointMagic = "INV-CKPT-1";

}  // namespace

void ModelConfig::validate() const {
  if (in_channels < 1) throw std::invalid_argument("model: in_channels must be >= 1");
  if (num_classes < 2) throw std::invalid_argument("model: num_classes must be >= 2");
  if (!(fixed_grid > 0.0)) throw std::invalid_argument("model: fixed_grid must be positive");
  if (!(calibration.alpha > 0.0)) throw std::invalid_argument("model: alpha must be positive");
  if (calibration.anchors != CalibrationConfig::kAllAnchors && calibration.anchors < 1) {
    throw std::invalid_argument("model: anchors must be positive or 'all'");
  }
  backbone.validate();
  predictor.validate();
}

bool ModelConfig::apply(std::string_view key, std::string_view value) {
  if (key == "in_channels") in_channels = kv::to_int(key, value);
  else if (key == "num_classes") num_classes = kv::to_int(key, value);
  else if (key == "enc_depths") backbone.enc_depths = kv::to_int_list(key, value);
  else if (key == "enc_channels") backbone.enc_channels = kv::to_int_list(key, value);
  else if (key == "dec_depths") backbone.dec_depths = kv::to_int_list(key, value);
  else if (key == "dec_channels") backbone.dec_channels = kv::to_int_list(key, value);
  else if (key == "k_neighbors") backbone.k_neighbors = kv::to_int(key, value);
  else if (key == "bottleneck_layers") backbone.bottleneck_layers = kv::to_int(key, value);
  else if (key == "norm") backbone.norm = predictor.norm = nn::parse_norm(value);
  else if (key == "out_dim") backbone.out_dim = kv::to_int(key, value);
  else if (key == "n_layers") predictor.n_layers = kv::to_int(key, value);
  else if (key == "refine_k") predictor.refine_k = kv::to_int(key, value);
  else if (key == "use_rfc") use_rfc = kv::to_bool(key, value);
  else if (key == "use_nrp") use_nrp = kv::to_bool(key, value);
  else if (key == "fixed_grid") fixed_grid = kv::to_double(key, value);
  else if (key == "alpha") calibration.alpha = kv::to_double(key, value);
  else if (key == "rho") calibration.reduction = parse_reduction(value);
  else if (key == "anchors") {
    calibration.anchors = value == "all" ? CalibrationConfig::kAllAnchors : kv::to_int64(key, value);
  } else if (key == "calibration_seed") calibration.seed = static_cast<std::uint64_t>(kv::to_int64(key, value));
  else if (key == "init_seed") init_seed = static_cast<std::uint64_t>(kv::to_int64(key, value));
  else return false;
  return true;
}

KeyValues ModelConfig::to_key_values() const {
  KeyValues out;
  out["in_channels"] = std::to_string(in_channels);
  out["num_classes"] = std::to_string(num_classes);
  out["enc_depths"] = kv::format_list(backbone.enc_depths);
  out["enc_channels"] = kv::format_list(backbone.enc_channels);
  out["dec_depths"] = kv::format_list(backbone.dec_depths);
  out["dec_channels"] = kv::format_list(backbone.dec_channels);
  out["k_neighbors"] = std::to_string(backbone.k_neighbors);
  out["bottleneck_layers"] = std::to_string(backbone.bottleneck_layers);
  out["norm"] = nn::to_string(backbone.norm);
  out["out_dim"] = std::to_string(backbone.out_dim);
  out["n_layers"] = std::to_string(predictor.n_layers);
  out["refine_k"] = std::to_string(predictor.refine_k);
  out["use_rfc"] = use_rfc ? "true" : "false";
  out["use_nrp"] = use_nrp ? "true" : "false";
  out["fixed_grid"] = kv::format_double(fixed_grid);
  out["alpha"] = kv::format_double(calibration.alpha);
  out["rho"] = to_string(calibration.reduction);
  out["anchors"] = calibration.anchors == CalibrationConfig::kAllAnchors ? "all" : std::to_string(calibration.anchors);
  out["calibration_seed"] = std::to_string(calibration.seed);
  out["init_seed"] = std::to_string(init_seed);
  return out;
}

namespace {

ModelConfig normalized(ModelConfig cfg) {
  cfg.predictor.channels = cfg.backbone.out_dim;
  cfg.predictor.norm = cfg.backbone.norm;
  cfg.validate();
  return cfg;
}

}  // namespace

InvariaModel::InvariaModel(const ModelConfig& cfg) : cfg_(normalized(cfg)) {
  std::mt19937_64 rng(cfg_.init_seed);
  backbone_ = Backbone(store_, cfg_.backbone, cfg_.in_channels, rng);
  predictor_ = Predictor(store_, cfg_.predictor, rng);
  classifier_ = nn::Linear(store_, "classifier", cfg_.backbone.out_dim, cfg_.num_classes, rng);
}

double InvariaModel::base_grid(const Coords& coords) const {
  return cfg_.use_rfc ? calibrate_grid_size(coords, cfg_.calibration) : cfg_.fixed_grid;
}

ad::Var InvariaModel::classify(ad::Tape& tape, const ad::Var& feats) const { return classifier_.forward(tape, feats); }

ad::Var InvariaModel::forward(ad::Tape& tape, const PointCloud& pc) const {
  if (pc.feature_dim() != cfg_.in_channels) {
    throw std::invalid_argument("model expects " + std::to_string(cfg_.in_channels) + " input features, cloud has " +
                                std::to_string(pc.feature_dim()));
  }
  const double grid = base_grid(pc.coords);
  const EncodeResult enc = backbone_.encode_decode(tape, pc, grid);
  if (!cfg_.use_nrp) return classify(tape, enc.per_point);
  const nn::FeatureMap fm{std::make_shared<const Coords>(pc.coords), enc.per_point, grid};
  return classify(tape, predictor_.refine(tape, fm).feats);
}

ad::Var InvariaModel::forward_to(ad::Tape& tape, const PointCloud& sparse, const Coords& dense_coords) const {
  if (sparse.feature_dim() != cfg_.in_channels) {
    throw std::invalid_argument("model expects " + std::to_string(cfg_.in_channels) + " input features, cloud has " +
                                std::to_string(sparse.feature_dim()));
  }
  const double grid = base_grid(sparse.coords);
  const EncodeResult enc = backbone_.encode_decode(tape, sparse, grid);
  auto dense = std::make_shared<const Coords>(dense_coords);
  if (!cfg_.use_nrp) {
    auto source = std::make_shared<const std::vector<int>>(nearest_indices(*dense, sparse.coords));
    return ad::gather_rows(classify(tape, enc.per_point), source);
  }
  const nn::FeatureMap fm{std::make_shared<const Coords>(sparse.coords), enc.per_point, grid};
  const double dense_grid = base_grid(*dense);
  return classify(tape, predictor_.predict_next_resolution(tape, fm, dense, dense_grid).feats);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    logits.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> InvariaModel::predict_labels(const PointCloud& pc) const {
  ad::Tape tape(/*record=*/false, /*training=*/false);
  return argmax_rows(forward(tape, pc).value());
}

// Layout:
//   INV-CKPT-1
//   config <n>             followed by n lines "key=value"
//   params <m>             followed by m records:
//     "<name> <rows> <cols> <trainable>\n" then rows*cols little-endian float64 (row-major) and "\n"
//   end
void InvariaModel::save(const std::filesystem::path& path) const {
  std::string out;
  out += kCheckpointMagic;
  out += '\n';
  const KeyValues config = cfg_.to_key_values();
  out += "config " + std::to_string(config.size()) + "\n";
  for (const auto& [k, v] : config) out += k + "=" + v + "\n";
  const auto& params = store_.all();
  out += "params " + std::to_string(params.size()) + "\n";
  for (const ad::Parameter& p : params) {
    out += p.name + " " + std::to_string(p.value.rows()) + " " + std::to_string(p.value.cols()) + " " +
           (p.trainable ? "1" : "0") + "\n";
    const std::size_t bytes = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, p.value.data(), bytes);
    out += '\n';
  }
  out += "end\n";
  write_file_atomic(path, out);
}

std::unique_ptr<InvariaModel> InvariaModel::load(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  const auto fail = [&](const std::string& what) -> void {
    throw ParseError(path.string() + ": checkpoint: " + what, pos);
  };
  const auto next_line = [&]() {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string::npos) fail("unexpected end of file");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kCheckpointMagic) {
    pos = 0;
    fail("missing INV-CKPT-1 header");
  }
  std::size_t count = 0;
  {
    std::istringstream head(next_line());
    std::string word;
    if (!(head >> word >> count) || word != "config") fail("expected 'config <n>'");
  }
  ModelConfig cfg;
  for (std::size_t i = 0; i < count; ++i) {
    const std::string line = next_line();
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("malformed config line '" + line + "'");
    if (!cfg.apply(line.substr(0, eq), line.substr(eq + 1))) fail("unknown config key '" + line.substr(0, eq) + "'");
  }
  auto model = std::make_unique<InvariaModel>(cfg);
  {
    std::istringstream head(next_line());
    std::string word;
    if (!(head >> word >> count) || word != "params") fail("expected 'params <m>'");
  }
  if (count != model->store_.all().size()) {
    fail("parameter count " + std::to_string(count) + " does not match the configured model (" +
         std::to_string(model->store_.all().size()) + ")");
  }
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream head(next_line());
    std::string name;
    Index rows = 0, cols = 0;
    int trainable = 0;
    if (!(head >> name >> rows >> cols >> trainable)) fail("malformed parameter header");
    ad::Parameter* p = model->store_.find(name);
    if (p == nullptr) fail("unknown parameter '" + name + "'");
    if (p->value.rows() != rows || p->value.cols() != cols) fail("shape mismatch for '" + name + "'");
    const std::size_t n = static_cast<std::size_t>(rows * cols) * sizeof(double);
    if (pos + n + 1 > bytes.size()) fail("truncated data for '" + name + "'");
    std::memcpy(p->value.data(), bytes.data() + pos, n);
    pos += n;
    if (bytes[pos] != '\n') fail("missing record terminator for '" + name + "'");
    ++pos;
  }
  if (next_line() != "end") fail("missing 'end' marker");
  return model;
}

}  // namespace invaria
