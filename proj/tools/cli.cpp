#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "treat/data.hpp"
#include "treat/error.hpp"
#include "treat/training.hpp"
#include "treat/verify.hpp"

namespace treat::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kSchemaVersion = 1;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path default_outdir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("TREAT_OUTDIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const ojson& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Validates the envelope shared by every resolved-config document.
void check_envelope(const nlohmann::json& j, const std::string& command,
                    const std::vector<std::string>& fields) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : j.items()) {
    bool ok = item.key() == "schema_version" || item.key() == "command" || item.key() == "seed";
    for (const auto& f : fields) ok = ok || item.key() == f;
    if (!ok) throw ConfigError("unknown config field '" + item.key() + "'");
  }
  if (!j.contains("schema_version") || j.at("schema_version") != kSchemaVersion) {
    throw ConfigError("config schema_version must be " + std::to_string(kSchemaVersion));
  }
  if (!j.contains("command") || j.at("command") != command) {
    throw ConfigError("config is not a '" + command + "' config");
  }
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

struct Context {
  std::ostream& out;
  std::ostream& err;
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
  std::string config, system, scheme, out, outdir;
  std::size_t agents = 0, trajectories = 0, test_trajectories = 0, steps = 0, subsample = 0;
  std::size_t condition = 0, predict = 0, test_predict = 0, obs_min = 0, obs_max = 0, workers = 1;
  double dt = 0.0, noise = 0.0, edge_prob = 0.0;
  std::uint64_t seed = 0;
  bool desk_scale = false;
  std::map<std::string, CLI::Option*> opt;

  [[nodiscard]] bool given(const std::string& name) const { return opt.at(name)->count() > 0; }
};

void add_simulate(CLI::App& app, SimulateFlags& f) {
  auto& o = f.opt;
  o["config"] = app.add_option("--config", f.config, "Resolved simulate config (JSON)");
  o["system"] = app.add_option("--system", f.system,
                               "simple_spring|forced_spring|damped_spring|triple_pendulum|attractor");
  o["agents"] = app.add_option("--agents", f.agents, "Number of agents (springs)");
  o["trajectories"] = app.add_option("--trajectories", f.trajectories, "Training trajectories");
  o["test-trajectories"] =
      app.add_option("--test-trajectories", f.test_trajectories, "Test trajectories (default 0)");
  o["dt"] = app.add_option("--dt", f.dt, "Integration step");
  o["steps"] = app.add_option("--steps", f.steps, "Raw integration steps of the training window");
  o["subsample"] = app.add_option("--subsample", f.subsample, "Keep every n-th raw step");
  o["condition"] = app.add_option("--condition", f.condition, "Condition points");
  o["predict"] = app.add_option("--predict", f.predict, "Training prediction points");
  o["test-predict"] = app.add_option("--test-predict", f.test_predict, "Test prediction points");
  o["obs-min"] = app.add_option("--obs-min", f.obs_min, "Minimum observations per agent");
  o["obs-max"] = app.add_option("--obs-max", f.obs_max, "Maximum observations per agent");
  o["noise"] = app.add_option("--noise", f.noise, "Gaussian observation noise sigma");
  o["edge-prob"] = app.add_option("--edge-prob", f.edge_prob, "Random coupling edge probability");
  o["scheme"] = app.add_option("--scheme", f.scheme, "euler|heun|rk4 (default per system)");
  o["seed"] = app.add_option("--seed", f.seed, "Dataset seed");
  o["workers"] = app.add_option("--workers", f.workers, "Worker threads");
  o["out"] = app.add_option("--out", f.out, "Dataset file (JSON lines)");
  o["outdir"] = app.add_option("--outdir", f.outdir, "Output directory (default $TREAT_OUTDIR or .)");
  o["desk-scale"] = app.add_flag("--desk-scale", f.desk_scale,
                                 "200 train / 50 test trajectories, 30 condition / 20 predict points");
}

int cmd_simulate(const SimulateFlags& f, Context& ctx) {
  DatasetConfig cfg;
  std::string out_path;
  if (!f.config.empty()) {
    const auto j = read_json(f.config);
    check_envelope(j, "simulate", {"dataset", "out"});
    cfg = dataset_config_from_json(j.at("dataset"));
    out_path = j.value("out", std::string());
  }
  if (f.desk_scale) {
    cfg.n_train = 200;
    cfg.n_test = 50;
    cfg.condition_points = 30;
    cfg.train_predict_points = 20;
    cfg.test_predict_points = 60;
  }
  if (f.given("system")) {
    const SystemKind kind = parse_system_kind(f.system);
    cfg.system = SystemSpec::defaults(kind, f.given("agents") ? f.agents : 1);
    cfg.scheme = default_scheme(kind);
  } else if (f.given("agents")) {
    cfg.system = SystemSpec::defaults(cfg.system.kind, f.agents);
  }
  if (f.given("scheme")) cfg.scheme = parse_scheme(f.scheme);
  if (f.given("trajectories")) {
    if (f.trajectories == 0) throw ConfigError("--trajectories must be >= 1");
    cfg.n_train = f.trajectories;
  }
  if (f.given("test-trajectories")) cfg.n_test = f.test_trajectories;
  if (f.given("dt")) cfg.dt = f.dt;
  if (f.given("subsample")) cfg.subsample = f.subsample;
  if (f.given("predict")) cfg.train_predict_points = f.predict;
  if (f.given("condition")) cfg.condition_points = f.condition;
  if (f.given("steps")) {
    if (cfg.subsample == 0 || f.steps % cfg.subsample != 0) {
      throw ConfigError("--steps (" + std::to_string(f.steps) + ") must be divisible by --subsample");
    }
    const std::size_t points = f.steps / cfg.subsample;
    if (f.given("condition") && f.given("predict") &&
        cfg.condition_points + cfg.train_predict_points != points) {
      throw ConfigError("--condition + --predict must equal --steps / --subsample");
    }
    if (f.given("condition")) {
      if (cfg.condition_points >= points) throw ConfigError("--condition leaves no prediction points");
      cfg.train_predict_points = points - cfg.condition_points;
    } else {
      if (cfg.train_predict_points >= points) throw ConfigError("--predict leaves no condition points");
      cfg.condition_points = points - cfg.train_predict_points;
    }
  }
  if (f.given("test-predict")) cfg.test_predict_points = f.test_predict;
  if (f.given("obs-max")) {
    cfg.obs_max = f.obs_max;
  } else {
    cfg.obs_max = std::min(cfg.obs_max, cfg.condition_points);
  }
  if (f.given("obs-min")) {
    cfg.obs_min = f.obs_min;
  } else {
    cfg.obs_min = std::min(cfg.obs_min, cfg.obs_max);
  }
  if (f.given("noise")) cfg.noise = f.noise;
  if (f.given("edge-prob")) cfg.edge_prob = f.edge_prob;
  if (f.given("seed")) cfg.seed = f.seed;
  cfg.workers = f.workers;
  if (cfg.n_train == 0) throw ConfigError("trajectories must be >= 1");
  cfg.validate();

  if (f.given("out") || f.given("outdir") || out_path.empty()) {
    out_path = f.given("out") ? f.out : (default_outdir(f.outdir) / "dataset.jsonl").string();
  }
  const fs::path out(out_path);

  const Dataset ds = generate_dataset(cfg);
  if (out.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(out.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + out.parent_path().string() + ": " + ec.message());
  }
  write_dataset(out, ds);

  ojson meta = ds.meta;
  meta["schema_version"] = kSchemaVersion;
  meta["file"] = out.filename().string();
  fs::path meta_path = out;
  meta_path.replace_extension(".meta.json");
  write_json(meta_path, meta);

  ojson resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "simulate";
  resolved["seed"] = cfg.seed;
  resolved["dataset"] = to_json(cfg);
  resolved["out"] = out.string();
  fs::path cfg_path = out;
  cfg_path.replace_extension(".config.json");
  write_json(cfg_path, resolved);

  ctx.out << "wrote " << ds.records.size() << " records (" << cfg.n_train << " train, "
          << cfg.n_test << " test) to " << out.string() << "\n";
  ctx.out << "normalization scale " << fmt(ds.scale()) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
  std::string config, data, variant, solver, alpha_grid, outdir;
  double alpha = 0.0, lr = 0.0, weight_decay = 0.0, val_fraction = 0.0;
  std::size_t epochs = 0, batch_size = 0, patience = 0, workers = 1, substeps = 0;
  std::uint64_t seed = 0;
  bool desk_scale = false;
  std::map<std::string, CLI::Option*> opt;

  [[nodiscard]] bool given(const std::string& name) const { return opt.at(name)->count() > 0; }
};

void add_train(CLI::App& app, TrainFlags& f) {
  auto& o = f.opt;
  o["config"] = app.add_option("--config", f.config, "Resolved train config (JSON)");
  o["data"] = app.add_option("--data", f.data, "Dataset file from `simulate`");
  o["alpha"] = app.add_option("--alpha", f.alpha, "Reversal loss weight");
  o["loss-variant"] = app.add_option("--loss-variant", f.variant, "treat|gt_rev|rev2|none");
  o["alpha-grid"] =
      app.add_option("--alpha-grid", f.alpha_grid, "Comma-separated alphas; keeps the best on validation");
  o["epochs"] = app.add_option("--epochs", f.epochs, "Maximum epochs");
  o["seed"] = app.add_option("--seed", f.seed, "Initialization and shuffling seed");
  o["lr"] = app.add_option("--lr", f.lr, "AdamW learning rate");
  o["weight-decay"] = app.add_option("--weight-decay", f.weight_decay, "AdamW weight decay");
  o["batch-size"] = app.add_option("--batch-size", f.batch_size, "Trajectories per batch");
  o["patience"] = app.add_option("--patience", f.patience, "Early-stopping patience (0 disables)");
  o["val-fraction"] = app.add_option("--val-fraction", f.val_fraction, "Validation share of train");
  o["solver"] = app.add_option("--solver", f.solver, "Latent ODE solver: euler|heun|rk4");
  o["substeps"] = app.add_option("--substeps", f.substeps, "Solver steps per target interval");
  o["workers"] = app.add_option("--workers", f.workers,
                                "Threads per batch (> 1 relaxes bitwise reproducibility)");
  o["outdir"] = app.add_option("--outdir", f.outdir, "Output directory (default $TREAT_OUTDIR or .)");
  o["desk-scale"] = app.add_flag("--desk-scale", f.desk_scale,
                                 "40 epochs, batch 16, lr 1e-3, Euler latent solver");
}

void write_history_csv(const fs::path& path, const std::vector<EpochRecord>& history) {
  std::ostringstream csv;
  csv << "epoch,l_pred,l_reverse,total,val_mse,val_l_reverse\n";
  for (const auto& r : history) {
    csv << r.epoch << ',' << fmt(r.l_pred) << ',' << fmt(r.l_reverse) << ',' << fmt(r.total) << ','
        << fmt(r.val_mse) << ',' << fmt(r.val_l_reverse) << '\n';
  }
  write_text(path, csv.str());
}

int cmd_train(const TrainFlags& f, Context& ctx) {
  TrainingConfig cfg;
  std::string data_path;
  std::vector<double> grid;
  std::string outdir_cfg;
  if (!f.config.empty()) {
    const auto j = read_json(f.config);
    check_envelope(j, "train", {"data", "training", "alpha_grid", "outdir"});
    if (j.contains("training")) cfg = training_config_from_json(j.at("training"));
    data_path = j.value("data", std::string());
    if (j.contains("alpha_grid")) grid = j.at("alpha_grid").get<std::vector<double>>();
    outdir_cfg = j.value("outdir", std::string());
  }
  if (f.desk_scale) {
    cfg.epochs = 40;
    cfg.batch_size = 16;
    cfg.lr = 1e-3;
    cfg.patience = 10;
    cfg.model.scheme = Scheme::euler;
  }
  if (f.given("data")) data_path = f.data;
  if (data_path.empty()) throw ConfigError("--data is required");
  if (f.given("loss-variant")) cfg.variant = parse_loss_variant(f.variant);
  if (f.given("alpha")) cfg.alpha = f.alpha;
  if (f.given("alpha-grid")) grid = parse_list(f.alpha_grid, "--alpha-grid");
  if (f.given("epochs")) cfg.epochs = f.epochs;
  if (f.given("seed")) cfg.seed = f.seed;
  if (f.given("lr")) cfg.lr = f.lr;
  if (f.given("weight-decay")) cfg.weight_decay = f.weight_decay;
  if (f.given("batch-size")) cfg.batch_size = f.batch_size;
  if (f.given("patience")) cfg.patience = f.patience;
  if (f.given("val-fraction")) cfg.val_fraction = f.val_fraction;
  if (f.given("solver")) cfg.model.scheme = parse_scheme(f.solver);
  if (f.given("substeps")) cfg.model.substeps = f.substeps;
  if (f.given("workers")) cfg.workers = f.workers;
  for (double a : grid) {
    if (!(a >= 0.0)) throw ConfigError("--alpha-grid entries must be >= 0");
  }

  const Dataset ds = read_dataset(data_path);
  auto train_all = observation_sets(ds, "train");
  if (train_all.empty()) throw DatasetError("dataset has no train records");
  cfg.model.input_dim = train_all[0].feature_dim;
  cfg.model.output_dim = train_all[0].feature_dim;
  cfg.validate();
  const auto test_sets = observation_sets(ds, "test");
  auto [train_set, val_set] = split_validation(std::move(train_all), cfg.val_fraction);

  const fs::path outdir = f.given("outdir") || outdir_cfg.empty() ? default_outdir(f.outdir)
                                                                  : fs::path(outdir_cfg);

  ojson resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "train";
  resolved["seed"] = cfg.seed;
  resolved["data"] = data_path;
  resolved["training"] = to_json(cfg);
  if (!grid.empty()) resolved["alpha_grid"] = grid;
  resolved["outdir"] = outdir.string();
  write_json(outdir / "train_config.json", resolved);

  TrainingConfig used = cfg;
  TrainResult result;
  std::vector<std::pair<double, double>> search;
  bool retried = false;
  for (int attempt = 0;; ++attempt) {
    try {
      if (grid.empty()) {
        result = train(train_set, val_set, used);
      } else {
        AlphaSearch s = tune_alpha(train_set, val_set, used, grid);
        used.alpha = s.best_alpha;
        search = s.val_mse;
        result = std::move(s.best);
      }
      break;
    } catch (const DivergenceError& e) {
      if (attempt > 0) throw;
      ctx.err << "training diverged (" << e.what() << "); retrying with lr " << fmt(used.lr / 2)
              << "\n";
      used.lr /= 2.0;
      retried = true;
    }
  }

  ojson extra;
  extra["loss_variant"] = std::string(to_string(used.variant));
  extra["alpha"] = used.effective_alpha();
  extra["seed"] = used.seed;
  extra["dataset_scale"] = ds.scale();
  save_checkpoint(outdir / "checkpoint.json", used.model, result.params, extra);
  write_history_csv(outdir / "losses.csv", result.history);

  ojson summary;
  summary["schema_version"] = kSchemaVersion;
  summary["loss_variant"] = std::string(to_string(used.variant));
  summary["alpha"] = used.effective_alpha();
  summary["lr"] = used.lr;
  summary["retried_with_halved_lr"] = retried;
  summary["epochs_run"] = result.history.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_val_mse"] = result.best_val_mse;
  summary["skipped_batches"] = result.skipped_batches;
  if (!search.empty()) {
    auto arr = ojson::array();
    for (const auto& [a, v] : search) arr.push_back({{"alpha", a}, {"best_val_mse", v}});
    summary["alpha_search"] = std::move(arr);
  }
  const EpochRecord& last = result.history.back();
  summary["final_epoch"] = {{"l_pred", last.l_pred},         {"l_reverse", last.l_reverse},
                            {"total", last.total},           {"val_mse", last.val_mse},
                            {"val_l_reverse", last.val_l_reverse}};
  if (!test_sets.empty()) {
    const EvalReport test = evaluate(result.params, used.model, test_sets);
    summary["test"] = to_json(test);
    summary["test_mse"] = test.mse;
    summary["test_max_error_gt_rev"] = test.max_error_gt_rev;
  }
  write_json(outdir / "summary.json", summary);

  ctx.out << "trained " << to_string(used.variant) << " alpha=" << fmt(used.effective_alpha())
          << " for " << result.history.size() << " epochs (best " << result.best_epoch
          << ", val mse " << fmt(result.best_val_mse) << ")\n";
  if (summary.contains("test_mse")) {
    ctx.out << "test mse " << fmt(summary["test_mse"].get<double>()) << " ("
            << fmt(summary["test_mse"].get<double>() * 100.0) << " x 1e-2), max_error_gt_rev "
            << fmt(summary["test_max_error_gt_rev"].get<double>()) << "\n";
  }
  ctx.out << "wrote checkpoint.json, losses.csv, summary.json to " << outdir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::string config, checkpoint, data, split = "test", buckets = "20,40,60", out, outdir;
  std::size_t max_targets = 0, batch_size = 32;
  std::map<std::string, CLI::Option*> opt;

  [[nodiscard]] bool given(const std::string& name) const { return opt.at(name)->count() > 0; }
};

void add_eval(CLI::App& app, EvalFlags& f) {
  auto& o = f.opt;
  o["config"] = app.add_option("--config", f.config, "Resolved eval config (JSON)");
  o["checkpoint"] = app.add_option("--checkpoint", f.checkpoint, "Checkpoint from `train`");
  o["data"] = app.add_option("--data", f.data, "Dataset file");
  o["split"] = app.add_option("--split", f.split, "Dataset split (default test)");
  o["buckets"] = app.add_option("--buckets", f.buckets, "Prediction lengths (default 20,40,60)");
  o["max-targets"] = app.add_option("--max-targets", f.max_targets, "Truncate prediction windows");
  o["batch-size"] = app.add_option("--batch-size", f.batch_size, "Trajectories per forward pass");
  o["out"] = app.add_option("--out", f.out, "Metrics file (default <outdir>/metrics.json)");
  o["outdir"] = app.add_option("--outdir", f.outdir, "Output directory (default $TREAT_OUTDIR or .)");
}

int cmd_eval(const EvalFlags& f, Context& ctx) {
  std::string checkpoint, data, split = f.split, out_path;
  std::vector<double> buckets_d = parse_list(f.buckets, "--buckets");
  std::size_t max_targets = f.max_targets;
  if (!f.config.empty()) {
    const auto j = read_json(f.config);
    check_envelope(j, "eval", {"checkpoint", "data", "split", "buckets", "max_targets", "out"});
    checkpoint = j.value("checkpoint", std::string());
    data = j.value("data", std::string());
    split = j.value("split", split);
    if (j.contains("buckets")) buckets_d = j.at("buckets").get<std::vector<double>>();
    max_targets = j.value("max_targets", max_targets);
    out_path = j.value("out", std::string());
  }
  if (f.given("checkpoint")) checkpoint = f.checkpoint;
  if (f.given("data")) data = f.data;
  if (f.given("split")) split = f.split;
  if (f.given("buckets")) buckets_d = parse_list(f.buckets, "--buckets");
  if (f.given("max-targets")) max_targets = f.max_targets;
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required");
  if (data.empty()) throw ConfigError("--data is required");
  std::vector<std::size_t> buckets;
  for (double b : buckets_d) {
    if (!(b >= 1.0) || b != static_cast<double>(static_cast<std::size_t>(b))) {
      throw ConfigError("bucket lengths must be positive integers");
    }
    buckets.push_back(static_cast<std::size_t>(b));
  }
  if (f.given("out") || f.given("outdir") || out_path.empty()) {
    out_path = f.given("out") ? f.out : (default_outdir(f.outdir) / "metrics.json").string();
  }

  const Checkpoint ck = load_checkpoint(checkpoint);
  const Dataset ds = read_dataset(data);
  const auto sets = observation_sets(ds, split, max_targets);
  if (sets.empty()) throw ConfigError("dataset split '" + split + "' is empty");
  if (sets[0].feature_dim != ck.config.input_dim) {
    throw ArtifactMismatchError("checkpoint expects " + std::to_string(ck.config.input_dim) +
                                " features per agent, dataset has " +
                                std::to_string(sets[0].feature_dim));
  }
  const EvalReport report = evaluate(ck.params, ck.config, sets, buckets, f.batch_size);

  const fs::path out(out_path);
  ojson resolved;
  resolved["schema_version"] = kSchemaVersion;
  resolved["command"] = "eval";
  resolved["seed"] = ck.extra.value("seed", std::uint64_t{0});
  resolved["checkpoint"] = checkpoint;
  resolved["data"] = data;
  resolved["split"] = split;
  resolved["buckets"] = buckets;
  resolved["max_targets"] = max_targets;
  resolved["out"] = out.string();
  fs::path cfg_path = out;
  cfg_path.replace_extension(".config.json");
  write_json(cfg_path, resolved);

  ojson metrics;
  metrics["schema_version"] = kSchemaVersion;
  metrics["split"] = split;
  metrics["loss_variant"] = ck.extra.value("loss_variant", std::string("unknown"));
  metrics["alpha"] = ck.extra.value("alpha", 0.0);
  metrics["units_note"] = "mse on max-abs normalized features; mse_1e-2 = mse * 100";
  metrics["report"] = to_json(report);
  write_json(out, metrics);

  ctx.out << "evaluated " << report.n_trajectories << " trajectories (" << report.skipped
          << " skipped), horizon " << report.horizon << "\n";
  ctx.out << "mse " << fmt(report.mse) << " (" << fmt(report.mse * 100.0) << " x 1e-2)\n";
  for (const auto& [len, v] : report.buckets) {
    ctx.out << "  length " << len << ": mse " << fmt(v) << " (" << fmt(v * 100.0) << " x 1e-2)\n";
  }
  ctx.out << "max_error_gt_rev " << fmt(report.max_error_gt_rev) << "\n";
  ctx.out << "wrote " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyFlags {
  std::string suite, json, csv;
  std::vector<std::string> systems;
  std::size_t workers = 1;
};

void add_verify(CLI::App& app, VerifyFlags& f) {
  app.add_option("--suite", f.suite, "lemma1|theorem1|lemma2|energy|mle|all")->required();
  app.add_option("--system", f.systems, "Spring kind(s) for the energy suite");
  app.add_option("--json", f.json, "Write the JSON report here");
  app.add_option("--csv", f.csv, "Write flat CSV measurements here");
  app.add_option("--workers", f.workers, "Worker threads");
}

int cmd_verify(const VerifyFlags& f, Context& ctx) {
  static const std::vector<std::string> kAll{"lemma1", "theorem1", "lemma2", "energy", "mle"};
  std::vector<std::string> suites;
  if (f.suite == "all") {
    suites = kAll;
  } else if (std::find(kAll.begin(), kAll.end(), f.suite) != kAll.end()) {
    suites = {f.suite};
  } else {
    throw ConfigError("unknown suite '" + f.suite + "' (expected lemma1|theorem1|lemma2|energy|mle|all)");
  }
  std::vector<SystemKind> kinds;
  for (const auto& s : f.systems) kinds.push_back(parse_system_kind(s));
  if (f.workers == 0) throw ConfigError("--workers must be >= 1");

  std::vector<SuiteReport> reports;
  bool all_passed = true;
  for (const auto& name : suites) {
    reports.push_back(run_suite(name, kinds, f.workers));
    const auto& r = reports.back();
    for (const auto& c : r.checks) {
      ctx.out << (c.passed ? "PASS " : "FAIL ") << r.suite << ": " << c.name << " (" << c.detail
              << ")\n";
    }
    all_passed = all_passed && r.passed();
  }

  if (!f.json.empty()) {
    ojson j;
    j["schema_version"] = kSchemaVersion;
    j["passed"] = all_passed;
    auto arr = ojson::array();
    for (const auto& r : reports) arr.push_back(to_json(r));
    j["suites"] = std::move(arr);
    write_json(f.json, j);

    ojson resolved;
    resolved["schema_version"] = kSchemaVersion;
    resolved["command"] = "verify";
    resolved["seed"] = 0;
    resolved["suite"] = f.suite;
    resolved["systems"] = f.systems;
    fs::path cfg_path = f.json;
    cfg_path.replace_extension(".config.json");
    write_json(cfg_path, resolved);
  }
  if (!f.csv.empty()) write_text(f.csv, to_csv(reports));
  ctx.out << (all_passed ? "all checks passed" : "some checks FAILED") << "\n";
  return all_passed ? 0 : 1;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Time-reversal regularized GraphODE laboratory", "treat"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  SimulateFlags sim;
  TrainFlags tr;
  EvalFlags ev;
  VerifyFlags ver;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a trajectory dataset");
  add_simulate(*sim_cmd, sim);
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  add_train(*train_cmd, tr);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  add_eval(*eval_cmd, ev);
  auto* verify_cmd = app.add_subcommand("verify", "Run numerical verification suites");
  add_verify(*verify_cmd, ver);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Context ctx{out, err};
  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim, ctx);
    if (train_cmd->parsed()) return cmd_train(tr, ctx);
    if (eval_cmd->parsed()) return cmd_eval(ev, ctx);
    if (verify_cmd->parsed()) return cmd_verify(ver, ctx);
  } catch (const IntegrationError& e) {
    err << "simulation error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const Error& e) {
    err << to_string(e.kind()) << " error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace treat::cli
