// invaria: data generation, calibration, training, inference and shift evaluation.

#include "invaria/calibration.hpp"
#include "invaria/evaluation.hpp"
#include "invaria/geometry.hpp"
#include "invaria/inference.hpp"
#include "invaria/io.hpp"
#include "invaria/kernels.hpp"
#include "invaria/scene.hpp"
#include "invaria/training.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace invaria;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_doubles(const std::string& flag, const std::string& text) {
  try {
    std::vector<double> v = kv::to_double_list(flag, text);
    if (v.empty()) throw std::invalid_argument("empty list");
    return v;
  } catch (const std::invalid_argument&) {
    throw UsageError("--" + flag + ": expected a comma-separated list of numbers, got '" + text + "'");
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<PointCloud> load_split(const fs::path& manifest, const std::string& split) {
  std::vector<PointCloud> out;
  for (const ManifestEntry& e : read_manifest(manifest)) {
    if (split == "all" || (split == "train") == e.train) out.push_back(load_pts(e.path));
  }
  if (out.empty()) throw std::runtime_error(manifest.string() + ": no clouds in split '" + split + "'");
  return out;
}

// ---- gen-data ----

struct GenArgs {
  std::string out;
  int count = 40;
  int val = 10;
  std::uint64_t seed = 0;
  SceneSpec spec;
  bool text = false;
};

int run_gen_data(const GenArgs& a) {
  if (a.val < 0 || a.val > a.count) throw UsageError("--val must be between 0 and --count");
  const fs::path dir(a.out);
  std::vector<ManifestEntry> entries;
  for (int i = 0; i < a.count; ++i) {
    const PointCloud pc = generate_scene(a.seed + static_cast<std::uint64_t>(i), a.spec);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03d.pts", i);
    save_pts(dir / name, pc, a.text ? PtsFormat::kText : PtsFormat::kBinary);
    entries.push_back({name, i < a.count - a.val});
  }
  write_manifest(dir / "manifest.txt", entries);
  std::cout << "wrote " << a.count << " scenes and " << (dir / "manifest.txt").string() << "\n";
  return 0;
}

// ---- calibrate ----

struct CalibArgs {
  std::string input;
  double alpha = 1.0;
  std::string rho = "mean";
  std::string anchors = "all";
  std::uint64_t seed = 0;
  std::string out;
};

CalibrationConfig calibration_from(double alpha, const std::string& rho, const std::string& anchors,
                                   std::uint64_t seed) {
  CalibrationConfig cfg;
  cfg.alpha = alpha;
  try {
    cfg.reduction = parse_reduction(rho);
    cfg.anchors = anchors == "all" ? CalibrationConfig::kAllAnchors : kv::to_int64("anchors", anchors);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.seed = seed;
  return cfg;
}

int run_calibrate(const CalibArgs& a) {
  const PointCloud pc = load_pts(a.input);
  const CalibrationResult r = calibrate(pc.coords, calibration_from(a.alpha, a.rho, a.anchors, a.seed));
  std::vector<double> d = r.distances;
  std::sort(d.begin(), d.end());
  double mean = 0.0;
  for (const double x : d) mean += x;
  mean /= static_cast<double>(d.size());
  const double median = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  std::cout << "grid,anchors,min,mean,median,max\n"
            << fmt(r.grid) << "," << d.size() << "," << fmt(d.front()) << "," << fmt(mean) << "," << fmt(median)
            << "," << fmt(d.back()) << "\n";
  if (!a.out.empty()) {
    std::string csv = "anchor,distance\n";
    for (std::size_t i = 0; i < r.anchors.size(); ++i) csv += std::to_string(r.anchors[i]) + "," + fmt(r.distances[i]) + "\n";
    write_file_atomic(a.out, csv);
  }
  return 0;
}

// ---- train ----

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string log;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<std::string> rho;
  std::optional<std::string> anchors;
  double tau_star = 0.02;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  RunConfig cfg = a.config.empty() ? RunConfig{} : RunConfig::from_file(a.config);
  KeyValues extra;
  for (const std::string& kvp : a.overrides) {
    const auto eq = kvp.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kvp + "'");
    extra[kvp.substr(0, eq)] = kvp.substr(eq + 1);
  }
  if (a.seed) extra["seed"] = std::to_string(*a.seed);
  if (a.alpha) extra["alpha"] = kv::format_double(*a.alpha);
  if (a.rho) extra["rho"] = *a.rho;
  if (a.anchors) extra["anchors"] = *a.anchors;
  try {
    cfg.apply(extra);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<PointCloud> scenes = load_split(a.data, "train");
  if (a.tau_star > 0.0) {
    for (PointCloud& pc : scenes) pc = voxelize(pc, a.tau_star).pooled;
  }
  InvariaModel model(cfg.model);
  FitOptions opts;
  opts.checkpoint = fs::path(a.out);
  if (!a.log.empty()) opts.log_csv = fs::path(a.log);
  const int every = std::max(1, cfg.train.total_steps / 10);
  if (!a.quiet) {
    opts.on_step = [&](int step, const LossBreakdown& l) {
      if (step % every == 0 || step + 1 == cfg.train.total_steps) {
        std::fprintf(stderr, "step %d/%d loss %.5f\n", step + 1, cfg.train.total_steps, l.total);
      }
    };
  }
  const LossBreakdown last = fit(model, scenes, cfg.train, opts);
  std::cout << "final_loss," << fmt(last.total) << "\ncheckpoint," << a.out << "\n";
  return 0;
}

// ---- infer ----

struct InferArgs {
  std::string checkpoint;
  std::string input;
  double fraction = 0.6;
  std::uint64_t seed = 0;
  std::string out;
  std::string stats;
};

int run_infer(const InferArgs& a) {
  const auto model = InvariaModel::load(a.checkpoint);
  const PointCloud pc = load_pts(a.input);
  const AsymmetricResult r = asymmetric_segment(pc, *model, a.fraction, a.seed);
  std::string labels;
  labels.reserve(r.labels.size() * 2);
  for (const int l : r.labels) labels += std::to_string(l) + "\n";
  write_file_atomic(a.out, labels);
  std::string stats = "backbone_points,full_points,token_reduction,nrp_model\n";
  stats += std::to_string(r.stats.backbone_points) + "," + std::to_string(r.stats.full_points) + "," +
           fmt(r.stats.token_reduction) + "," + (r.stats.model_has_nrp ? "true" : "false") + "\n";
  if (!a.stats.empty()) write_file_atomic(a.stats, stats);
  std::cout << stats;
  if (!r.stats.model_has_nrp && a.fraction < 1.0) {
    std::cerr << "warning: model was trained without next-resolution prediction\n";
  }
  return 0;
}

// ---- eval ----

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string suite = "resolution";
  std::string split = "val";
  double tau_star = 0.02;
  std::string multipliers = "0.5,1,2,3";
  std::string factors = "2,1,0.5,0.333333333333";
  std::string fractions = "0.05,0.1,1";
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string drop_out;
};

int run_eval(const EvalArgs& a) {
  Suite suite;
  try {
    suite = parse_suite(a.suite);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.split != "train" && a.split != "val" && a.split != "all") throw UsageError("--split must be train|val|all");
  const auto model = InvariaModel::load(a.checkpoint);
  const std::vector<PointCloud> scenes = load_split(a.data, a.split);
  const EvalOptions opts{a.fraction, a.seed};

  ShiftReport report;
  double base = 0.0, worst = 0.0;
  if (suite == Suite::kResolution) {
    const auto m = parse_doubles("multipliers", a.multipliers);
    report = resolution_shift_suite(*model, scenes, a.tau_star, m, opts);
    base = report.settings[0];
    worst = report.settings[0];
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 1.0) base = report.settings[i];
      worst = std::max(worst, report.settings[i]);
    }
  } else if (suite == Suite::kScale) {
    const auto f = parse_doubles("factors", a.factors);
    report = scale_shift_suite(*model, scenes, f, a.tau_star, opts);
    base = std::count(f.begin(), f.end(), 1.0) ? 1.0 : f.front();
    worst = *std::min_element(f.begin(), f.end());
  } else {
    const auto f = parse_doubles("fractions", a.fractions);
    report = density_shift_suite(*model, scenes, f, a.tau_star, opts);
    base = *std::max_element(f.begin(), f.end());
    worst = *std::min_element(f.begin(), f.end());
  }
  const std::string csv = report_csv(report);
  if (!a.out.empty()) write_file_atomic(a.out, csv);
  if (!a.drop_out.empty()) write_file_atomic(a.drop_out, drop_csv(report, base, worst));
  std::cout << csv;
  return 0;
}

// ---- report ----

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  CsvTable t;
  std::string line;
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream cells(s);
    while (std::getline(cells, cell, ',')) out.push_back(cell);
    return out;
  };
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty CSV");
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split(line));
    if (t.rows.back().size() != t.header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(t.rows.size()) + " has the wrong number of cells");
    }
  }
  return t;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out) {
  std::string long_csv = "source,setting,metric,value\n";
  std::ostringstream summary;
  for (const std::string& path : inputs) {
    const CsvTable t = read_csv(path);
    if (t.header.empty() || t.header[0] != "setting") {
      throw std::runtime_error(path + ": not a shift report (first column must be 'setting')");
    }
    const std::string source = fs::path(path).stem().string();
    summary << "== " << source << " ==\n";
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      char cell[32];
      std::snprintf(cell, sizeof cell, "%-10s", t.header[c].c_str());
      summary << cell;
    }
    summary << "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        std::string shown = row[c];
        if (c > 0 && shown != "nan") {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.1f", 100.0 * std::stod(row[c]));
          shown = buf;
        }
        char cell[32];
        std::snprintf(cell, sizeof cell, "%-10s", shown.c_str());
        summary << cell;
        if (c > 0) long_csv += source + "," + row[0] + "," + t.header[c] + "," + row[c] + "\n";
      }
      summary << "\n";
    }
  }
  std::cout << summary.str();
  if (!out.empty()) write_file_atomic(out, long_csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  CLI::App app{"Resolution-robust point cloud segmentation toolkit"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate synthetic labeled rooms and a manifest");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of scenes");
  gen_cmd->add_option("--val", gen.val, "How many of the scenes form the val split");
  gen_cmd->add_option("--seed", gen.seed, "Seed of the first scene");
  gen_cmd->add_option("--density", gen.spec.density, "Surface samples per square meter");
  gen_cmd->add_option("--min-points", gen.spec.min_points, "Minimum points per scene");
  gen_cmd->add_option("--tables", gen.spec.tables);
  gen_cmd->add_option("--chairs", gen.spec.chairs);
  gen_cmd->add_option("--clutter", gen.spec.clutter);
  gen_cmd->add_flag("--text", gen.text, "Write PTS1 text instead of PTSB1");

  CalibArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "Print the calibrated grid size of a cloud");
  cal_cmd->add_option("input", cal.input, "PTS1/PTSB1 file")->required();
  cal_cmd->add_option("--alpha", cal.alpha, "Grid multiplier")->check(CLI::PositiveNumber);
  cal_cmd->add_option("--rho", cal.rho, "Reduction: mean|min|median");
  cal_cmd->add_option("--anchors", cal.anchors, "Anchor count or 'all'");
  cal_cmd->add_option("--seed", cal.seed, "Anchor sampling seed");
  cal_cmd->add_option("--out", cal.out, "Per-anchor distance CSV");

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Train a model from a manifest");
  tr_cmd->add_option("--config", tr.config, "key = value config file");
  tr_cmd->add_option("--data", tr.data, "Dataset manifest")->required();
  tr_cmd->add_option("--out", tr.out, "Checkpoint path")->required();
  tr_cmd->add_option("--log", tr.log, "Per-step CSV log");
  tr_cmd->add_option("--set", tr.overrides, "Override a config key (key=value), repeatable");
  tr_cmd->add_option("--seed", tr.seed, "Training seed");
  tr_cmd->add_option("--alpha", tr.alpha, "Calibration multiplier");
  tr_cmd->add_option("--rho", tr.rho, "Calibration reduction");
  tr_cmd->add_option("--anchors", tr.anchors, "Calibration anchors");
  tr_cmd->add_option("--tau-star", tr.tau_star, "Voxelize training scenes at this grid first (0 keeps them)");
  tr_cmd->add_flag("--quiet", tr.quiet, "No progress output");

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Label a cloud, optionally from a sparse subset");
  inf_cmd->add_option("--checkpoint", inf.checkpoint)->required();
  inf_cmd->add_option("--input", inf.input, "PTS1/PTSB1 file")->required();
  inf_cmd->add_option("--sparse-fraction", inf.fraction, "Fraction of points encoded by the backbone");
  inf_cmd->add_option("--seed", inf.seed);
  inf_cmd->add_option("--out", inf.out, "Labels, one per line")->required();
  inf_cmd->add_option("--stats", inf.stats, "Stats CSV");

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Run a resolution, scale or density shift suite");
  ev_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  ev_cmd->add_option("--data", ev.data, "Dataset manifest")->required();
  ev_cmd->add_option("--suite", ev.suite, "resolution|scale|density");
  ev_cmd->add_option("--split", ev.split, "train|val|all");
  ev_cmd->add_option("--tau-star", ev.tau_star, "Default training grid size");
  ev_cmd->add_option("--multipliers", ev.multipliers, "Resolution suite grid multipliers");
  ev_cmd->add_option("--factors", ev.factors, "Scale suite factors");
  ev_cmd->add_option("--fractions", ev.fractions, "Density suite fractions");
  ev_cmd->add_option("--sparse-fraction", ev.fraction, "Asymmetric inference fraction");
  ev_cmd->add_option("--seed", ev.seed);
  ev_cmd->add_option("--out", ev.out, "Report CSV");
  ev_cmd->add_option("--drop-out", ev.drop_out, "Per-class drop CSV");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* rep_cmd = app.add_subcommand("report", "Merge shift reports into a summary and a long-format CSV");
  rep_cmd->add_option("inputs", report_inputs, "Report CSVs")->required();
  rep_cmd->add_option("--out", report_out, "Long-format CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen);
    if (*cal_cmd) return run_calibrate(cal);
    if (*tr_cmd) return run_train(tr);
    if (*inf_cmd) return run_infer(inf);
    if (*ev_cmd) return run_eval(ev);
    if (*rep_cmd) return run_report(report_inputs, report_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
