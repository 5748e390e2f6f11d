// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Pass a list of criterion numbers to run a subset.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "wavecast/wavecast.hpp"

using namespace wavecast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------
// 1

Outcome newell_closed_form() {
  const auto pair = fixtures::constant_pair(25.0, 900.0, 2000);
  const NewellParams w5{5.0};
  const auto shift = solve_time_shift(pair, 1000, w5);
  const double residual = std::abs(newell_mismatch(pair, 1000, shift.steps, w5));
  const auto still = fixtures::constant_pair(0.0, 137.0, 1000);
  const auto s0 = solve_time_shift(still, 900, w5);
  const bool ok = std::abs(shift.seconds - 30.0) < 1e-9 && residual < 1e-6 && s0.seconds == 137.0 / 5.0;
  return {ok, fmt("T = %.12g s, |f(T)| = %.2e m, standstill T = %.12g s", shift.seconds, residual, s0.seconds)};
}

// ---------------------------------------------------------------------------
// 2

Outcome model_exactness() {
  double worst_pred = 0.0, worst_res = 0.0;
  std::size_t checked = 0;
  for (std::size_t shift_steps : {150, 300, 450}) {
    const auto pair = fixtures::model_exact_pair(5000, shift_steps, 5.0);
    const auto& ve = pair.ego().velocities();
    for (std::size_t i = 1200; i + shift_steps < pair.size(); i += 397) {
      const auto shift = solve_time_shift(pair, i, NewellParams{});
      const auto pred = newell_predict(pair, i, shift.sigma_steps, NewellParams{});
      for (std::size_t j = 1; j <= pred.size(); ++j) worst_pred = std::max(worst_pred, std::abs(pred[j - 1] - ve[i + j]));
      for (double r : residual_history(pair, i, 600, shift)) worst_res = std::max(worst_res, std::abs(r));
      ++checked;
    }
  }
  return {worst_pred < 1e-6 && worst_res < 1e-6,
          fmt("%g anchors, max prediction error %.2e m/s, max residual %.2e m/s", static_cast<double>(checked),
              worst_pred, worst_res)};
}

// ---------------------------------------------------------------------------
// 3

using ad::Graph;
using ad::Var;

gradcheck::Result check_op(ad::Shape sa, ad::Shape sb, const std::function<Var(Var, Var)>& op, std::uint64_t seed,
                           double scale = 1.0) {
  std::mt19937_64 rng(seed);
  nn::ParamSet ps;
  ps.add("a", gradcheck::random_tensor(sa, rng, scale));
  ps.add("b", gradcheck::random_tensor(sb, rng, scale));
  return gradcheck::check_params(ps, [&](Graph& g, nn::ParamSet& p) {
    Var out = op(g.param(p.at("a")), g.param(p.at("b")));
    std::mt19937_64 wrng(seed + 100);
    return ad::sum(ad::mul(out, g.constant(gradcheck::random_tensor(g.shape(out), wrng))));
  });
}

Outcome gradient_suite() {
  std::vector<std::pair<std::string, gradcheck::Result>> results;
  auto unary = [](const std::function<Var(Var)>& f) { return [f](Var a, Var) { return f(a); }; };
  results.emplace_back("matmul", check_op({4, 5}, {5, 3}, ad::matmul, 1));
  results.emplace_back("matvec", check_op({4, 5}, {5}, ad::matmul, 2));
  results.emplace_back("add", check_op({6}, {6}, ad::add, 3));
  results.emplace_back("sub", check_op({6}, {6}, ad::sub, 4));
  results.emplace_back("mul", check_op({2, 3}, {2, 3}, ad::mul, 5));
  results.emplace_back("scale", check_op({5}, {1}, unary([](Var a) { return ad::scale(a, 1.7); }), 6));
  results.emplace_back("concat", check_op({3}, {4}, ad::concat, 7));
  results.emplace_back("slice", check_op({7}, {1}, unary([](Var a) { return ad::slice(a, 2, 4); }), 8));
  results.emplace_back("sigmoid", check_op({6}, {1}, unary(ad::sigmoid), 9, 3.0));
  results.emplace_back("tanh", check_op({6}, {1}, unary(ad::tanh), 10, 2.0));
  results.emplace_back("relu", check_op({6}, {1}, unary(ad::relu), 11));
  results.emplace_back("sum", check_op({6}, {1}, unary(ad::sum), 12));
  results.emplace_back("mse", check_op({6}, {6}, ad::mse, 13));

  {
    std::mt19937_64 rng(21);
    nn::ParamSet ps;
    nn::init_lstm(ps, "c", 3, 5, rng);
    ps.add("x", gradcheck::random_tensor({3}, rng));
    ps.add("h", gradcheck::random_tensor({5}, rng));
    ps.add("s", gradcheck::random_tensor({5}, rng));
    results.emplace_back("lstm cell", gradcheck::check_params(ps, [](Graph& g, nn::ParamSet& p) {
      auto next = nn::lstm_cell(g.param(p.at("x")), {g.param(p.at("h")), g.param(p.at("s"))}, nn::lstm_weights(g, p, "c"));
      return ad::add(ad::sum(next.h), ad::scale(ad::sum(ad::mul(next.c, next.c)), 0.5));
    }));
  }
  {
    std::mt19937_64 rng(22);
    nn::ParamSet ps;
    nn::init_lstm_encoder(ps, 6, rng);
    std::vector<double> seq(15);
    for (auto& v : seq) v = std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto target = gradcheck::random_tensor({6}, rng);
    results.emplace_back("2-layer encoder", gradcheck::check_params(ps, [&](Graph& g, nn::ParamSet& p) {
      return ad::mse(nn::lstm_encode(g, seq, p), g.constant(target));
    }));
  }
  {
    std::mt19937_64 rng(23);
    nn::ParamSet ps;
    nn::init_linear(ps, "dec", 7, 11, rng);
    ps.add("h", gradcheck::random_tensor({7}, rng));
    const auto target = gradcheck::random_tensor({11}, rng);
    results.emplace_back("linear decoder", gradcheck::check_params(ps, [&](Graph& g, nn::ParamSet& p) {
      return ad::mse(nn::linear(g, g.param(p.at("h")), p, "dec"), g.constant(target));
    }));
  }
  {
    // full size: 1000 -> 200 -> 200 -> 400, probing sampled coordinates
    ModelConfig mc;
    mc.k = 600;
    mc.l = 400;
    mc.hidden = 200;
    mc.seed = 24;
    auto ps = init_params(ModelKind::VelFC, mc);
    std::mt19937_64 rng(24);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> x(1000), y(400);
    for (auto& v : x) v = n01(rng);
    for (auto& v : y) v = n01(rng);
    results.emplace_back("VelFC 1000/200/200/400", gradcheck::check_params(ps, [&](Graph& g, nn::ParamSet& p) {
      return ad::mse(forward(g, ModelKind::VelFC, mc, p, x), g.constant(ad::Tensor({400}, y)));
    }, 60, 24));
  }

  double worst = 0.0;
  std::string where;
  std::size_t probes = 0;
  for (const auto& [name, r] : results) {
    probes += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = name + " " + r.worst;
    }
  }
  return {worst < 1e-4, fmt("%g checks, %g coordinates, worst relative error %.2e", static_cast<double>(results.size()),
                            static_cast<double>(probes), worst) + " (" + where + ")"};
}

// ---------------------------------------------------------------------------
// 4

Outcome metric_oracle() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> count(1, 40), len(1, 60);
  std::normal_distribution<double> vel(15.0, 6.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = count(rng), l = len(rng);
    Forecasts p(n, std::vector<double>(l)), t(n, std::vector<double>(l));
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < l; ++b) {
        p[a][b] = vel(rng);
        t[a][b] = vel(rng);
      }
    }
    for (std::size_t j = 1; j <= l; ++j) {
      // straight double sum over samples and horizons
      double ve_ref = 0.0, ave_ref = 0.0;
      for (std::size_t a = 0; a < n; ++a) ve_ref += std::abs(p[a][j - 1] - t[a][j - 1]);
      ve_ref /= static_cast<double>(n);
      for (std::size_t m = 1; m <= j; ++m) {
        for (std::size_t a = 0; a < n; ++a) ave_ref += std::abs(p[a][m - 1] - t[a][m - 1]);
      }
      ave_ref /= static_cast<double>(n * j);
      worst = std::max(worst, std::abs(ve(p, t, j) - ve_ref) / std::max(ve_ref, 1e-300));
      worst = std::max(worst, std::abs(ave(p, t, j) - ave_ref) / std::max(ave_ref, 1e-300));
    }
  }
  const Forecasts hp{{1.0, 3.0}, {5.0, 2.0}};
  const Forecasts ht{{0.0, 1.0}, {3.0, 3.0}};  // errors (1, 2) and (2, 1)
  const bool hand = ve(hp, ht, 1) == 1.5 && ve(hp, ht, 2) == 1.5 && ave(hp, ht, 2) == 1.5;
  return {worst < 1e-9 && hand, fmt("100 fixtures, worst relative deviation %.2e; hand fixture VE = %g, AVE(2) = %g",
                                    worst, ve(hp, ht, 1), ave(hp, ht, 2))};
}

// ---------------------------------------------------------------------------
// 5

Outcome pipeline_counts() {
  // 10000 steps of ego data; the lead has its own earlier history so every
  // index has a Newell shift
  const std::size_t pre = 450;
  const auto pair = fixtures::model_exact_pair(10000 + pre, pre, 5.0);
  WindowSpec spec;
  spec.k = 600;
  spec.l = 400;
  spec.k_under = 300;
  const auto set = build_windows(pair, spec, NewellParams{}, 0, {pre, pre + 10000});

  SplitSpec ss;
  ss.train = {{0.0, 300.0}, {520.0, 800.0}};
  ss.val = {{800.0, 1045.0}};
  ss.test = {{350.0, 470.0}};
  ss.buffer = 50.0;
  const auto sp = split(set.samples, ss);
  const double lo = 350.0 - ss.buffer, hi = 470.0 + ss.buffer;
  std::size_t violations = 0;
  for (const auto& s : sp.test) {
    if (s.t_start < 350.0 - 1e-9 || s.t_end >= 470.0) ++violations;
    if (s.t_start < 350.0 && s.t_end >= lo) ++violations;
    if (s.t_end >= 470.0 && s.t_start < hi) ++violations;
  }
  // nothing retained elsewhere may reach into the test interval or its buffers
  for (const auto* group : {&sp.train, &sp.val}) {
    for (const auto& s : *group) {
      if (s.t_end >= lo && s.t_start < hi) ++violations;
    }
  }
  const bool ok = set.samples.size() == 9001 && set.skipped_sigma == 0 && set.skipped_history == 0 &&
                  !sp.test.empty() && violations == 0;
  return {ok, fmt("%g samples, %g test samples, %g buffer violations", static_cast<double>(set.samples.size()),
                  static_cast<double>(sp.test.size()), static_cast<double>(violations))};
}

// ---------------------------------------------------------------------------
// shared noisy data for 6 and 7

VehiclePair noisy_exact_pair(std::size_t n, std::size_t shift_steps, std::uint64_t seed) {
  const auto clean = fixtures::model_exact_pair(n, shift_steps, 5.0);
  return VehiclePair(add_noise(clean.lead(), 0.5, 0.3, seed), add_noise(clean.ego(), 0.5, 0.3, seed + 1));
}

// ---------------------------------------------------------------------------
// 6

Outcome residual_pass_through() {
  WindowSpec spec;  // full size: k 600, l 400, k_under 300
  spec.stride = 97;
  const auto pair = noisy_exact_pair(6000, 450, 6);
  const auto samples = build_windows(pair, spec, NewellParams{}, 0, {450, pair.size()}).samples;
  const auto stats = fit_norm(samples);
  ModelConfig mc;
  auto ps = init_params(ModelKind::ResLSTMFC, mc);
  for (auto& v : ps.at("dec.W").value.values) v = 0.0;
  for (auto& v : ps.at("dec.b").value.values) v = 0.0;

  MethodRuns newell{"Newell", {}}, res{"ResLSTM", {}};
  PredictionSet a, b;
  for (const auto& s : samples) {
    a.keys.emplace_back(s.pair_id, s.t_index);
    b.keys.emplace_back(s.pair_id, s.t_index);
    a.truths.push_back(s.target);
    b.truths.push_back(s.target);
    a.predictions.push_back(predict(ModelKind::Newell, mc, ps, s, stats));
    b.predictions.push_back(predict(ModelKind::ResLSTMFC, mc, ps, s, stats));
  }
  newell.seeds.push_back(std::move(a));
  res.seeds.push_back(std::move(b));
  const auto rep = report({newell, res});
  const auto& x = rep.methods[0];
  const auto& y = rep.methods[1];
  double worst = std::abs(x.ave.mean - y.ave.mean);
  for (std::size_t h = 0; h < x.ve_at.size(); ++h) worst = std::max(worst, std::abs(x.ve_at[h].mean - y.ve_at[h].mean));
  for (std::size_t j = 0; j < x.curve.size(); ++j) worst = std::max(worst, std::abs(x.curve[j].mean - y.curve[j].mean));
  return {worst <= 1e-9, fmt("%g samples, Newell AVE@40s %.6f, ResLSTM AVE@40s %.6f, max row difference %.2e",
                             static_cast<double>(samples.size()), x.ave.mean, y.ave.mean, worst)};
}

// ---------------------------------------------------------------------------
// 7

Outcome overfit_sanity() {
  struct Case {
    ModelKind kind;
    WindowSpec spec;
    std::size_t hidden;
    double lr;
  };
  WindowSpec small;
  small.k = 100;
  small.l = 40;
  small.k_under = 50;
  const WindowSpec full{};
  // the LSTM models at reduced width and length, Vel-FC at full size
  const std::vector<Case> cases = {{ModelKind::VelFC, full, 200, 1e-3},
                                   {ModelKind::EgoOnlyLSTMFC, small, 16, 1e-2},
                                   {ModelKind::VelLSTMFC, small, 16, 1e-2},
                                   {ModelKind::ResLSTMFC, small, 16, 1e-2}};
  const auto pair = noisy_exact_pair(2000, 450, 7);
  bool ok = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto sample = make_sample(pair, 1500, c.spec, NewellParams{});
    const std::vector<Sample> one{sample};
    const auto stats = fit_norm(one);
    ModelConfig mc;
    mc.k = c.spec.k;
    mc.l = c.spec.l;
    mc.k_under = c.spec.k_under;
    mc.hidden = c.hidden;
    TrainConfig tc;
    tc.lr = c.lr;
    tc.max_epochs = 200;
    tc.patience = 200;
    tc.batch_size = 1;
    const auto rec = train(c.kind, mc, tc, one, one, stats, 1);
    const double initial = rec.history.front().train_loss;
    const double ratio = rec.best_val_loss / initial;
    ok = ok && ratio < 0.01;
    detail += std::string(detail.empty() ? "" : ", ") + std::string(model_flag(c.kind)) +
              fmt(" %.2e (epoch %g)", ratio, static_cast<double>(rec.best_epoch));
  }
  return {ok, "final/initial MSE: " + detail};
}

// ---------------------------------------------------------------------------
// 8

Outcome synthetic_ordering() {
  const auto cfg = Config::load(std::string(WAVECAST_SOURCE_DIR) + "/configs/jam.cfg");
  const auto sc = SynthConfig::from_config(cfg);
  const auto pairs = add_measurement_noise(synth_generate(sc), sc);
  const auto ws = WindowSpec::from_config(cfg);
  const auto np = NewellParams::from_config(cfg);
  std::vector<Sample> all;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto w = build_windows(pairs[p], ws, np, p);
    all.insert(all.end(), w.samples.begin(), w.samples.end());
  }
  const auto sp = split(all, SplitSpec::from_config(cfg));
  const auto stats = fit_norm(sp.train);
  const auto tc = TrainConfig::from_config(cfg);
  const auto mc = ModelConfig::from(ws, cfg);
  const std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());

  std::vector<MethodRuns> runs;
  for (auto kind : {ModelKind::ConstantVelocity, ModelKind::Newell, ModelKind::EgoOnlyLSTMFC, ModelKind::ResLSTMFC}) {
    MethodRuns mr{std::string(model_display_name(kind)), {}};
    std::vector<nn::ParamSet> trained;
    if (is_learned(kind)) {
      for (auto& o : multi_seed(kind, mc, tc, sp.train, sp.val, stats, jobs)) {
        if (!o.record) return {false, "seed " + std::to_string(o.seed) + " failed: " + o.error->what()};
        trained.push_back(o.record->best_params);
      }
    } else {
      trained.emplace_back();
    }
    for (auto& ps : trained) {
      PredictionSet set;
      for (const auto& s : sp.test) {
        set.keys.emplace_back(s.pair_id, s.t_index);
        set.predictions.push_back(predict(kind, mc, ps, s, stats));
        set.truths.push_back(s.target);
      }
      mr.seeds.push_back(std::move(set));
    }
    runs.push_back(std::move(mr));
  }
  const auto rep = report(runs);
  std::cout << render_table(rep);
  const double cv = rep.methods[0].ave.mean, nw = rep.methods[1].ave.mean, ego = rep.methods[2].ave.mean,
               res = rep.methods[3].ave.mean;
  return {res < cv && res < nw && res < ego,
          fmt("AVE@40s: ResLSTM-FC %.4f, constant %.4f, Newell %.4f, Ego-only %.4f", res, cv, nw, ego) +
              fmt(" (%g seeds, %g test samples)", static_cast<double>(rep.methods[3].seed_count),
                  static_cast<double>(rep.sample_count))};
}

// ---------------------------------------------------------------------------
// 9

int cli(const std::string& args) {
  const std::string cmd = std::string(WAVECAST_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Files under `a` that are missing from or differ in `b`.
std::size_t tree_differences(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::size_t diffs = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++diffs;
  }
  return diffs;
}

Outcome rerun_determinism() {
  const auto root = fs::temp_directory_path() / "wavecast_acceptance_rerun";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ofstream(root / "scen.cfg") << "synth.n_vehicles = 20\nsynth.alpha = 2.5\nsynth.seed = 3\n"
                                      "synth.lead_profile = 0:25, 60:8, 120:25, 200:10\n"
                                      "synth.lead_gain = 0.3\nsynth.pair_gap_target = 250\nsynth.duration = 300\n";
  std::ofstream(root / "exp.cfg") << "window.k = 20\nwindow.l = 40\nwindow.k_under = 10\nwindow.stride = 5\n"
                                     "split.train = 0:150\nsplit.val = 170:225\nsplit.test = 240:301\n"
                                     "split.buffer = 10\nmodel.hidden = 4\ntrain.max_epochs = 3\ntrain.seeds = 1,2\n";
  const auto r = root.string();
  using Clock = std::chrono::steady_clock;
  struct Step {
    std::string args;
    fs::path out;        // directory the command writes
    fs::path rerun_out;  // -o given to the rerun
    fs::path compare;    // where the rerun puts the same files
  };
  const std::vector<Step> steps = {
      {"synth -c " + r + "/scen.cfg -o " + r + "/data", root / "data", root / "re_data", root / "re_data"},
      // train writes <out>/<model>/
      {"train -c " + r + "/exp.cfg --model vel-lstm " + r + "/data/pair_0.csv -o " + r + "/runs",
       root / "runs" / "vel-lstm", root / "re_runs", root / "re_runs" / "vel-lstm"},
      {"train -c " + r + "/exp.cfg --model newell " + r + "/data/pair_0.csv -o " + r + "/runs",
       root / "runs" / "newell", root / "re_runs", root / "re_runs" / "newell"},
      {"eval " + r + "/runs " + r + "/data/pair_0.csv --models constant,newell,vel-lstm -o " + r + "/eval",
       root / "eval", root / "re_eval", root / "re_eval"},
      {"predict " + r + "/runs/vel-lstm/seed_2.params " + r + "/data/pair_0.csv -i 2200 -o " + r + "/fc",
       root / "fc", root / "re_fc", root / "re_fc"},
  };
  std::size_t files = 0, diffs = 0;
  double original = 0.0, rerun = 0.0;
  for (const auto& step : steps) {
    auto t0 = Clock::now();
    if (cli(step.args) != 0) return {false, "command failed: wavecast " + step.args};
    original += std::chrono::duration<double>(Clock::now() - t0).count();
    t0 = Clock::now();
    if (cli("rerun " + (step.out / "manifest.json").string() + " -o " + step.rerun_out.string()) != 0) {
      return {false, "rerun failed for: wavecast " + step.args};
    }
    rerun += std::chrono::duration<double>(Clock::now() - t0).count();
    diffs += tree_differences(step.out, step.compare, files);
  }
  return {diffs == 0 && files > 0, fmt("%g commands, %g files compared, %g differ; ", static_cast<double>(steps.size()),
                                       static_cast<double>(files), static_cast<double>(diffs)) +
                                       fmt("commands %.2f s, reruns %.2f s", original, rerun)};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // stated runtime bound
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "Newell closed-form oracle", 1.0, newell_closed_form},
      {2, "model-exact pair", 10.0, model_exactness},
      {3, "gradient suite", 60.0, gradient_suite},
      {4, "metric oracle", 5.0, metric_oracle},
      {5, "pipeline counts and split buffers", 30.0, pipeline_counts},
      {6, "residual pass-through", 60.0, residual_pass_through},
      {7, "single-sample overfit", 300.0, overfit_sanity},
      {8, "synthetic congestion ordering", 1800.0, synthetic_ordering},
      {9, "rerun determinism", 0.0, rerun_determinism},
  };
  std::set<int> only;
  for (int a = 1; a < argc; ++a) only.insert(std::atoi(argv[a]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    if (c.limit_s > 0.0 && secs >= c.limit_s) {
      pass = false;
      o.detail += fmt("; runtime over the %g s bound", c.limit_s);
    }
    failures += pass ? 0 : 1;
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name << " -- " << o.detail
              << fmt(" [%.2f s]", secs) << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
