#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "treat/training.hpp"
#include "treat/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace treat;

namespace {

fs::path g_work;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string num(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

int run_cli(std::vector<std::string> args, std::string* captured = nullptr) {
  args.insert(args.begin(), "treat");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (captured != nullptr) *captured = out.str();
  if (code != 0 && code != 1) std::cerr << "  [treat " << args.at(1) << "] " << err.str();
  return code;
}

void must(int code, const std::string& what) {
  if (code != 0) throw std::runtime_error(what + " exited with " + std::to_string(code));
}

json load(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw std::runtime_error("missing " + p.string());
  return json::parse(f);
}

std::string bytes_of(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = bytes_of(e.path());
  }
  return files;
}

Outcome from_suite(const SuiteReport& r) {
  Outcome o{r.passed(), ""};
  for (const auto& c : r.checks) {
    if (!o.detail.empty()) o.detail += "; ";
    o.detail += (c.passed ? "" : "FAILED ") + c.name + " [" + c.detail + "]";
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome criterion1() { return from_suite(run_suite("energy")); }
Outcome criterion2() { return from_suite(run_suite("lemma1")); }
Outcome criterion3() { return from_suite(run_suite("theorem1")); }
Outcome criterion4() { return from_suite(run_suite("lemma2")); }

Outcome criterion5() {
  double worst = 0.0;
  std::string where;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DatasetConfig dc;
    dc.system = SystemSpec::defaults(SystemKind::simple_spring, 2);
    dc.n_train = 2;
    dc.condition_points = 6;
    dc.train_predict_points = 4;
    dc.obs_min = 2;
    dc.obs_max = 4;
    dc.seed = seed;
    const auto sets = observation_sets(generate_dataset(dc), "train");
    ModelConfig mc;
    mc.input_dim = mc.output_dim = sets[0].feature_dim;
    mc.d_hidden = 8;
    mc.d_enc = 4;
    mc.d_aug = 4;
    mc.ode_hidden = 8;
    mc.decoder_hidden = 8;
    ModelParams params = init_params(mc, 100 + seed);
    const std::vector<const ObservationSet*> batch{&sets[0], &sets[1]};
    const double alpha = 0.5;
    const auto analytic = batch_gradients(params, mc, batch, LossVariant::treat, alpha);
    auto& entries = params.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      for (std::size_t i = 0; i < entries[e].value.size(); ++i) {
        const double h = 1e-3;
        const double orig = entries[e].value.data[i];
        auto loss_at = [&](double offset) {
          entries[e].value.data[i] = orig + offset;
          const double v = batch_gradients(params, mc, batch, LossVariant::treat, alpha).total;
          entries[e].value.data[i] = orig;
          return v;
        };
        const double fd =
            (-loss_at(2 * h) + 8 * loss_at(h) - 8 * loss_at(-h) + loss_at(-2 * h)) / (12.0 * h);
        const double an = analytic.grads[e].data[i];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        if (rel > worst) {
          worst = rel;
          where = entries[e].name + " seed " + std::to_string(seed);
        }
      }
    }
  }
  return {worst < 1e-4, "max relative error " + num(worst) + " at " + where + " (5-point central differences, bound 1e-4)"};
}

// Shared desk-scale runs for criteria 6, 7 and 9.
struct SeedRun {
  double alpha = 0.0;
  std::map<std::string, json> eval20;  // variant -> eval report on the 20-target window
  std::map<std::string, json> eval60;  // variant -> eval report with 20/40/60 buckets
};

std::vector<SeedRun> g_runs;

void desk_scale_runs() {
  if (!g_runs.empty()) return;
  for (int s = 1; s <= 3; ++s) {
    const std::string seed = std::to_string(s);
    const fs::path dir = g_work / "desk" / ("seed" + seed);
    const std::string data = (dir / "data.jsonl").string();
    must(run_cli({"simulate", "--desk-scale", "--seed", seed, "--out", data}), "simulate");
    auto train = [&](const std::string& variant, std::vector<std::string> extra) {
      std::vector<std::string> args{"train",  "--data", data,        "--desk-scale",
                                    "--seed", seed,     "--loss-variant", variant,
                                    "--outdir", (dir / variant).string()};
      args.insert(args.end(), extra.begin(), extra.end());
      must(run_cli(args), "train " + variant);
    };
    SeedRun run;
    train("none", {"--alpha", "0"});
    train("treat", {"--alpha-grid", "0.1,0.5,1"});
    run.alpha = load(dir / "treat" / "summary.json").at("alpha").get<double>();
    std::ostringstream a;
    a.precision(17);
    a << run.alpha;
    train("rev2", {"--alpha", a.str()});
    for (const std::string v : {"none", "treat", "rev2"}) {
      const std::string ck = (dir / v / "checkpoint.json").string();
      must(run_cli({"eval", "--checkpoint", ck, "--data", data, "--max-targets", "20", "--buckets",
                    "20", "--out", (dir / v / "eval20.json").string()}),
           "eval20 " + v);
      must(run_cli({"eval", "--checkpoint", ck, "--data", data, "--buckets", "20,40,60", "--out",
                    (dir / v / "eval60.json").string()}),
           "eval60 " + v);
      run.eval20[v] = load(dir / v / "eval20.json").at("report");
      run.eval60[v] = load(dir / v / "eval60.json").at("report");
    }
    g_runs.push_back(std::move(run));
  }
}

double mean_of(const std::string& variant, const std::string& key) {
  double sum = 0.0;
  for (const auto& r : g_runs) sum += r.eval20.at(variant).at(key).get<double>();
  return sum / static_cast<double>(g_runs.size());
}

Outcome criterion6() {
  desk_scale_runs();
  const double mse_treat = mean_of("treat", "mse");
  const double mse_none = mean_of("none", "mse");
  const double rev_treat = mean_of("treat", "l_reverse");
  const double rev_none = mean_of("none", "l_reverse");
  std::string alphas;
  for (const auto& r : g_runs) alphas += (alphas.empty() ? "" : ",") + num(r.alpha);
  const bool ok = mse_treat <= mse_none && rev_none >= 2.0 * rev_treat;
  return {ok, "mean test mse treat " + num(mse_treat) + " vs baseline " + num(mse_none) +
                  "; mean l_reverse treat " + num(rev_treat) + " vs baseline " + num(rev_none) +
                  " (ratio " + num(rev_none / rev_treat) + ", need >= 2); tuned alphas " + alphas};
}

Outcome criterion7() {
  desk_scale_runs();
  const double treat = mean_of("treat", "max_error_gt_rev");
  const double rev2 = mean_of("rev2", "max_error_gt_rev");
  return {treat <= rev2,
          "mean MaxError_gt_rev treat " + num(treat) + " vs rev2 " + num(rev2) + " over 3 seeds"};
}

Outcome criterion8() { return from_suite(run_suite("mle")); }

Outcome criterion9() {
  desk_scale_runs();
  std::size_t models = 0;
  std::string bad;
  for (std::size_t s = 0; s < g_runs.size(); ++s) {
    for (const auto& [variant, report] : g_runs[s].eval60) {
      ++models;
      std::vector<double> b;
      for (const auto& bucket : report.at("buckets")) b.push_back(bucket.at("mse").get<double>());
      if (b.size() != 3 || !(b[0] <= b[1] && b[1] <= b[2])) {
        bad += " seed" + std::to_string(s + 1) + "/" + variant;
      }
    }
  }
  return {bad.empty() && models == 9,
          std::to_string(models) + " models checked at lengths 20/40/60" +
              (bad.empty() ? "" : "; nonmonotone:" + bad)};
}

Outcome criterion10() {
  const fs::path dir = g_work / "repro";
  const std::string data = (dir / "data.jsonl").string();
  const std::string run = (dir / "run").string();
  const std::vector<std::vector<std::string>> commands{
      {"simulate", "--system", "simple_spring", "--agents", "2", "--trajectories", "12",
       "--test-trajectories", "4", "--condition", "10", "--predict", "6", "--test-predict", "8",
       "--obs-min", "4", "--obs-max", "8", "--noise", "0.01", "--seed", "9", "--out", data},
      {"train", "--data", data, "--epochs", "3", "--batch-size", "4", "--seed", "2", "--solver",
       "euler", "--loss-variant", "treat", "--alpha", "0.5", "--outdir", run},
      {"eval", "--checkpoint", run + "/checkpoint.json", "--data", data, "--out",
       (dir / "metrics.json").string()},
      {"verify", "--suite", "lemma2", "--json", (dir / "verify.json").string(), "--csv",
       (dir / "verify.csv").string()},
  };
  for (const auto& c : commands) must(run_cli(c), c.at(0));
  const auto first = snapshot(dir);
  for (const auto& c : commands) must(run_cli(c), c.at(0) + " (rerun)");
  const auto second = snapshot(dir);
  must(run_cli({"simulate", "--config", (dir / "data.config.json").string()}), "simulate --config");
  must(run_cli({"train", "--config", run + "/train_config.json"}), "train --config");
  must(run_cli({"eval", "--config", (dir / "metrics.config.json").string()}), "eval --config");
  const auto third = snapshot(dir);
  const bool rerun_same = first == second;
  const bool config_same = first == third;
  return {rerun_same && config_same && first.size() >= 10,
          std::to_string(first.size()) + " files; rerun " +
              (rerun_same ? "identical" : "DIFFERS") + "; replay from resolved configs " +
              (config_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
  g_work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 energy classification", criterion1},
      {"2 round-trip order", criterion2},
      {"3 loss scaling", criterion3},
      {"4 max-error construction", criterion4},
      {"5 gradient correctness", criterion5},
      {"6 treat vs baseline", criterion6},
      {"7 treat vs rev2 MaxError", criterion7},
      {"8 chaos ordering", criterion8},
      {"9 error accumulation", criterion9},
      {"10 reproducibility", criterion10},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.passed ? "PASS" : "FAIL") << " criterion " << name << ": " << o.detail << " ("
              << num(secs) << " s)" << std::endl;
    failures += o.passed ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all 10 criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
