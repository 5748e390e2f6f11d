#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "wavecast/trajectory.hpp"

namespace fs = std::filesystem;

namespace {

const char* kScenario =
    "synth.n_vehicles = 20\n"
    "synth.alpha = 2.5\n"
    "synth.lead_profile = 0:25, 60:8, 120:25, 200:10\n"
    "synth.lead_gain = 0.3\n"
    "synth.pair_gap_target = 250\n"
    "synth.duration = 300\n"
    "synth.seed = 3\n";

const char* kExperiment =
    "window.k = 20\n"
    "window.l = 40\n"
    "window.k_under = 10\n"
    "window.stride = 5\n"
    "split.train = 0:150\n"
    "split.val = 170:225\n"
    "split.test = 240:301\n"
    "split.buffer = 10\n"
    "model.hidden = 3\n"
    "train.max_epochs = 2\n"
    "train.batch_size = 8\n";

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(WAVECAST_CLI) + " " + args;
  cmd += log.empty() ? " > /dev/null 2>&1" : " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

/// Scenario data plus a trained run shared by the CLI tests.
struct Workspace {
  fs::path root;
  fs::path data;
  fs::path run;

  Workspace() {
    root = fixtures::temp_dir("cli");
    write(root / "scen.cfg", kScenario);
    write(root / "exp.cfg", kExperiment);
    data = root / "data";
    run = root / "runs";
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

const fs::path& synth_data() {
  static const fs::path csv = [] {
    auto& w = ws();
    EXPECT_EQ(run("synth -c " + (w.root / "scen.cfg").string() + " -o " + w.data.string()), 0);
    return w.data / "pair_0.csv";
  }();
  return csv;
}

}  // namespace

TEST(Cli, SynthWritesPairsAndManifest) {
  const auto csv = synth_data();
  ASSERT_TRUE(fs::exists(csv));
  ASSERT_TRUE(fs::exists(ws().data / "manifest.json"));
  std::ifstream in(csv);
  auto pair = wavecast::ingest_csv(in);
  EXPECT_EQ(pair.size(), 3001u);
  auto manifest = nlohmann::json::parse(slurp(ws().data / "manifest.json"));
  EXPECT_EQ(manifest["command"], "synth");
  EXPECT_EQ(manifest["config"]["synth.seed"], "3");
  EXPECT_EQ(manifest["outputs"][0], "pair_0.csv");
}

TEST(Cli, SynthIsByteIdenticalAcrossRuns) {
  const auto csv = synth_data();
  const auto again = ws().root / "data_again";
  ASSERT_EQ(run("synth -c " + (ws().root / "scen.cfg").string() + " -o " + again.string()), 0);
  EXPECT_EQ(slurp(csv), slurp(again / "pair_0.csv"));
  EXPECT_EQ(slurp(ws().data / "manifest.json"), slurp(again / "manifest.json"));
}

TEST(Cli, SeedEnvironmentOverridesConfig) {
  synth_data();
  const auto out = ws().root / "data_seed";
  ASSERT_EQ(run("synth -c " + (ws().root / "scen.cfg").string() + " -o " + out.string()), 0);
  const auto other = ws().root / "data_seed9";
  const std::string cmd = "env WAVECAST_SEED=9 " + std::string(WAVECAST_CLI) + " synth -c " +
                          (ws().root / "scen.cfg").string() + " -o " + other.string() + " > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NE(slurp(out / "pair_0.csv"), slurp(other / "pair_0.csv"));
  auto manifest = nlohmann::json::parse(slurp(other / "manifest.json"));
  EXPECT_EQ(manifest["config"]["synth.seed"], "9");
  EXPECT_EQ(manifest["seed_override"], 9);
}

TEST(Cli, InvalidConfigExitsWithTwoAndNamesKey) {
  const auto bad = ws().root / "bad.cfg";
  write(bad, "synth.h_stop = 40\nsynth.h_go = 35\n");
  const auto log = ws().root / "bad.log";
  EXPECT_EQ(run("synth -c " + bad.string() + " -o " + (ws().root / "bad_out").string(), log), 2);
  EXPECT_NE(slurp(log).find("synth.h_stop"), std::string::npos);
  EXPECT_EQ(run("synth -c " + (ws().root / "missing.cfg").string() + " -o x"), 1);
  EXPECT_EQ(run("train --model lstm -c " + (ws().root / "exp.cfg").string() + " x.csv -o y"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, PhysicsTrainWritesSentinel) {
  const auto csv = synth_data();
  ASSERT_EQ(run("train -c " + (ws().root / "exp.cfg").string() + " --model newell " + csv.string() + " -o " +
                ws().run.string()),
            0);
  EXPECT_TRUE(fs::exists(ws().run / "newell" / "baseline.params"));
  EXPECT_TRUE(fs::exists(ws().run / "newell" / "manifest.json"));
}

TEST(Cli, MissingDataExitsWithOneBeforeTraining) {
  const auto out = ws().root / "runs_missing";
  EXPECT_EQ(run("train -c " + (ws().root / "exp.cfg").string() + " --model vel-fc " +
                (ws().root / "nope.csv").string() + " -o " + out.string()),
            1);
  EXPECT_FALSE(fs::exists(out / "vel-fc" / "seed_1.params"));
}

TEST(Cli, TrainEvalPredictAndRerun) {
  const auto csv = synth_data();
  const auto exp = (ws().root / "exp.cfg").string();
  ASSERT_EQ(run("train -c " + exp + " --model res-lstm " + csv.string() + " -o " + ws().run.string() + " --jobs 2"), 0);
  for (int s = 1; s <= 5; ++s) {
    EXPECT_TRUE(fs::exists(ws().run / "res-lstm" / ("seed_" + std::to_string(s) + ".params")));
    EXPECT_TRUE(fs::exists(ws().run / "res-lstm" / ("loss_seed_" + std::to_string(s) + ".csv")));
  }

  // physics-only report: single runs, zero spread
  const auto phys = ws().root / "eval_phys";
  ASSERT_EQ(run("eval " + ws().run.string() + " " + csv.string() + " --models constant,newell -c " + exp + " -o " +
                phys.string()),
            0);
  auto rep = nlohmann::json::parse(slurp(phys / "report.json"));
  ASSERT_EQ(rep["methods"].size(), 2u);
  for (const auto& m : rep["methods"]) {
    EXPECT_EQ(m["ave"]["std"], 0.0);
    EXPECT_EQ(m["seeds"], 1);
  }
  EXPECT_TRUE(fs::exists(phys / "ve_curve.csv"));
  EXPECT_TRUE(fs::exists(phys / "report.csv"));

  const auto full = ws().root / "eval_full";
  ASSERT_EQ(run("eval " + ws().run.string() + " " + csv.string() + " --models constant,newell,res-lstm -o " +
                full.string()),
            0);
  rep = nlohmann::json::parse(slurp(full / "report.json"));
  EXPECT_EQ(rep["methods"][2]["method"], "ResLSTM-FC");
  EXPECT_EQ(rep["methods"][2]["seeds"], 5);
  EXPECT_EQ(run("eval " + ws().run.string() + " " + csv.string() + " --models vel-fc -c " + exp + " -o " +
                (ws().root / "eval_missing").string()),
            1);

  // rerun from the manifests reproduces every file
  const auto rerun_train = ws().root / "rerun_train";
  ASSERT_EQ(run("rerun " + (ws().run / "res-lstm" / "manifest.json").string() + " -o " + rerun_train.string()), 0);
  for (const auto& entry : fs::directory_iterator(ws().run / "res-lstm")) {
    EXPECT_EQ(slurp(entry.path()), slurp(rerun_train / "res-lstm" / entry.path().filename()))
        << entry.path().filename();
  }
  const auto rerun_eval = ws().root / "rerun_eval";
  ASSERT_EQ(run("rerun " + (full / "manifest.json").string() + " -o " + rerun_eval.string()), 0);
  for (const auto& entry : fs::directory_iterator(full)) {
    EXPECT_EQ(slurp(entry.path()), slurp(rerun_eval / entry.path().filename())) << entry.path().filename();
  }

  // single forecast
  const auto fc = ws().root / "forecast";
  ASSERT_EQ(run("predict " + (ws().run / "res-lstm" / "seed_1.params").string() + " " + csv.string() +
                " --index 2000 -o " + fc.string()),
            0);
  auto f = nlohmann::json::parse(slurp(fc / "forecast.json"));
  for (const char* key : {"newell", "model", "constant", "truth", "horizon_s"}) EXPECT_EQ(f[key].size(), 40u) << key;
  EXPECT_DOUBLE_EQ(f["horizon_s"][39].get<double>(), 4.0);
  EXPECT_EQ(run("predict " + (ws().run / "res-lstm" / "seed_1.params").string() + " " + csv.string() +
                " --index 2990"),
            3);
}

TEST(Cli, RerunRejectsChangedInputs) {
  const auto root = ws().root / "changed";
  fs::create_directories(root);
  fs::copy_file(synth_data(), root / "pair.csv", fs::copy_options::overwrite_existing);
  const auto exp = (ws().root / "exp.cfg").string();
  ASSERT_EQ(run("train -c " + exp + " --model newell " + (root / "pair.csv").string() + " -o " + (root / "run").string()), 0);
  std::ofstream(root / "pair.csv", std::ios::app) << "\n";
  EXPECT_EQ(run("rerun " + (root / "run" / "newell" / "manifest.json").string()), 1);
}

TEST(Cli, PredictOnConstantSpeedData) {
  const auto root = ws().root / "const";
  fs::create_directories(root);
  {
    std::ofstream out(root / "pair.csv");
    wavecast::export_csv(fixtures::constant_pair(20.0, 1000.0, 2000), out);
  }
  write(root / "exp.cfg", "window.k = 50\nwindow.l = 300\nwindow.k_under = 20\n"
                           "split.train = 0:80\nsplit.val = 90:140\nsplit.test = 150:200\nsplit.buffer = 0\n");
  const auto exp = (root / "exp.cfg").string();
  ASSERT_EQ(run("train -c " + exp + " --model newell " + (root / "pair.csv").string() + " -o " + (root / "run").string()), 0);
  ASSERT_EQ(run("predict " + (root / "run" / "newell" / "baseline.params").string() + " " + (root / "pair.csv").string() +
                " -i 1200 -o " + (root / "fc").string()),
            0);
  auto f = nlohmann::json::parse(slurp(root / "fc" / "forecast.json"));
  for (const char* key : {"newell", "model", "constant", "truth"}) {
    ASSERT_EQ(f[key].size(), 300u);
    for (const auto& v : f[key]) EXPECT_NEAR(v.get<double>(), 20.0, 1e-9) << key;
  }
}
