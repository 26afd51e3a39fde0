#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "treat");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Result r;
  r.code = treat::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "treat_unit_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> small_simulate(const fs::path& out) {
  return {"simulate", "--agents", "2", "--trajectories", "6", "--test-trajectories", "2",
          "--condition", "8", "--predict", "4", "--test-predict", "6", "--obs-min", "3",
          "--obs-max", "5", "--seed", "4", "--out", out.string()};
}

nlohmann::json load(const fs::path& p) { return nlohmann::json::parse(std::ifstream(p)); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help and usage errors") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"train", "--help"}).code == 0);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"simulate", "--agents", "two"}).code == 2);
  }

  TEST_CASE("simulate guards and outputs") {
    const auto dir = fresh_dir("simulate");
    const auto zero = run({"simulate", "--trajectories", "0", "--out", (dir / "x.jsonl").string()});
    CHECK(zero.code == 2);
    CHECK(zero.err.find("trajectories") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "x.jsonl"));
    CHECK(run({"simulate", "--system", "spring", "--out", (dir / "x.jsonl").string()}).code == 2);
    CHECK(run({"simulate", "--steps", "6001", "--out", (dir / "x.jsonl").string()}).code == 2);

    const auto r = run(small_simulate(dir / "d.jsonl"));
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / "d.jsonl"));
    const auto meta = load(dir / "d.meta.json");
    CHECK(meta.at("config").at("rng") == "philox4x32-10");
    CHECK(meta.at("scale").get<double>() > 0.0);
    const auto cfg = load(dir / "d.config.json");
    CHECK(cfg.at("command") == "simulate");
    CHECK(cfg.at("schema_version") == 1);
    CHECK(cfg.at("dataset").at("n_train") == 6);

    auto bad = cfg;
    bad["extra"] = true;
    std::ofstream(dir / "bad.json") << bad.dump();
    CHECK(run({"simulate", "--config", (dir / "bad.json").string()}).code == 2);
  }

  TEST_CASE("steps and subsample define the windows") {
    const auto dir = fresh_dir("steps");
    const auto r = run({"simulate", "--agents", "5", "--trajectories", "3", "--dt", "0.001",
                        "--steps", "6000", "--subsample", "100", "--seed", "7", "--out",
                        (dir / "train.jsonl").string()});
    REQUIRE(r.code == 0);
    const auto cfg = load(dir / "train.config.json").at("dataset");
    CHECK(cfg.at("condition_points").get<int>() + cfg.at("train_predict_points").get<int>() == 60);
  }

  TEST_CASE("a blown-up integration exits with the simulation code") {
    const auto dir = fresh_dir("blowup");
    const auto r = run({"simulate", "--trajectories", "1", "--dt", "1e200", "--out",
                        (dir / "d.jsonl").string()});
    CHECK(r.code == 3);
    CHECK(r.err.find("step") != std::string::npos);
  }

  TEST_CASE("train and eval produce their artifacts") {
    const auto dir = fresh_dir("train");
    REQUIRE(run(small_simulate(dir / "d.jsonl")).code == 0);
    const auto t = run({"train", "--data", (dir / "d.jsonl").string(), "--epochs", "2",
                        "--batch-size", "2", "--solver", "euler", "--loss-variant", "treat",
                        "--alpha", "0.5", "--outdir", (dir / "run").string()});
    REQUIRE(t.code == 0);
    for (const char* f : {"checkpoint.json", "losses.csv", "summary.json", "train_config.json"})
      CHECK(fs::exists(dir / "run" / f));
    const auto summary = load(dir / "run" / "summary.json");
    CHECK(summary.contains("test_mse"));
    CHECK(summary.contains("test_max_error_gt_rev"));
    std::ifstream csv(dir / "run" / "losses.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "epoch,l_pred,l_reverse,total,val_mse,val_l_reverse");

    const auto e = run({"eval", "--checkpoint", (dir / "run" / "checkpoint.json").string(),
                        "--data", (dir / "d.jsonl").string(), "--buckets", "2,4,6", "--out",
                        (dir / "m.json").string()});
    REQUIRE(e.code == 0);
    const auto m = load(dir / "m.json").at("report");
    CHECK(m.at("buckets").size() == 3);
    CHECK(m.contains("max_error_gt_rev"));

    const auto none = run({"train", "--data", (dir / "d.jsonl").string(), "--epochs", "1",
                           "--loss-variant", "none", "--alpha", "0", "--outdir",
                           (dir / "none").string()});
    CHECK(none.code == 0);
    CHECK(load(dir / "none" / "summary.json").at("alpha") == 0.0);
  }

  TEST_CASE("eval rejects a checkpoint of the wrong shape") {
    const auto dir = fresh_dir("mismatch");
    REQUIRE(run(small_simulate(dir / "d2.jsonl")).code == 0);
    REQUIRE(run({"train", "--data", (dir / "d2.jsonl").string(), "--epochs", "1", "--outdir",
                 (dir / "run").string()}).code == 0);
    REQUIRE(run({"simulate", "--system", "triple_pendulum", "--trajectories", "2",
                 "--test-trajectories", "2", "--condition", "8", "--predict", "4",
                 "--test-predict", "4", "--obs-min", "3", "--obs-max", "5", "--out",
                 (dir / "pend.jsonl").string()}).code == 0);
    const auto r = run({"eval", "--checkpoint", (dir / "run" / "checkpoint.json").string(),
                        "--data", (dir / "pend.jsonl").string(), "--out",
                        (dir / "m.json").string()});
    CHECK(r.code == 5);
  }

  TEST_CASE("divergent training exits with the divergence code after one retry") {
    const auto dir = fresh_dir("diverge");
    REQUIRE(run(small_simulate(dir / "d.jsonl")).code == 0);
    const auto r = run({"train", "--data", (dir / "d.jsonl").string(), "--epochs", "3",
                        "--batch-size", "1", "--lr", "1e300", "--outdir", (dir / "run").string()});
    CHECK(r.code == 4);
    CHECK(r.err.find("retrying") != std::string::npos);
  }

  TEST_CASE("verify suites and exit codes") {
    const auto dir = fresh_dir("verify");
    const auto r = run({"verify", "--suite", "lemma2", "--json", (dir / "v.json").string()});
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
    CHECK(load(dir / "v.json").at("passed") == true);
    CHECK(run({"verify", "--suite", "energy", "--system", "damped_spring"}).code == 0);
    CHECK(run({"verify", "--suite", "nope"}).code == 2);
    CHECK(run({"verify"}).code == 2);
  }
}
