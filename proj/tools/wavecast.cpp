// wavecast command-line front end: synth | train | eval | predict | rerun.
//
// Every command writes manifest.json into its output directory before any other
// artifact. The manifest holds the effective configuration, the SHA-256 of each
// input, the seeds and the list of outputs, and `wavecast rerun` replays it.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wavecast/wavecast.hpp"

#ifndef WAVECAST_VERSION
#define WAVECAST_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace wavecast;

namespace {

// ---------------------------------------------------------------------------
// Files

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", digest[i]);
    hex += byte;
  }
  return hex;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer, bool binary = false) {
  ensure_dir(path.parent_path());
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  writer(out);
  out.flush();
  if (!out) throw Error(Errc::Io, "failed writing " + path.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path, [&](std::ostream& out) { out << text; });
}

VehiclePair load_pair(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open data file " + path);
  try {
    return ingest_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path + ": " + e.what());
  }
}

std::string absolute_path(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// ---------------------------------------------------------------------------
// Invocation and manifest

struct Invocation {
  std::string command;
  json options = json::object();
  Config config;
  std::vector<std::string> inputs;  // absolute paths
  std::optional<std::uint64_t> seed_override;
  fs::path out_dir;
  std::size_t jobs = 1;
};

json input_records(const std::vector<std::string>& inputs) {
  json arr = json::array();
  for (const auto& p : inputs) arr.push_back({{"path", p}, {"sha256", sha256_file(p)}});
  return arr;
}

/// Writes <dir>/manifest.json. `outputs` are relative to the command's output directory.
void write_manifest(const Invocation& inv, const fs::path& manifest_path, const std::vector<std::uint64_t>& seeds,
                    const std::vector<std::string>& outputs) {
  json m;
  m["tool"] = "wavecast";
  m["version"] = WAVECAST_VERSION;
  m["command"] = inv.command;
  m["options"] = inv.options;
  m["config"] = json::object();
  for (const auto& [k, v] : inv.config.entries()) m["config"][k] = v;
  if (inv.seed_override) m["seed_override"] = *inv.seed_override;
  m["inputs"] = input_records(inv.inputs);
  m["seeds"] = seeds;
  m["outputs"] = outputs;
  write_text(manifest_path, m.dump(2) + "\n");
}

std::optional<std::uint64_t> env_seed() {
  const char* raw = std::getenv("WAVECAST_SEED");
  if (!raw || !*raw) return std::nullopt;
  long long v = 0;
  if (!wavecast::detail::parse_int(raw, v) || v < 0) {
    throw Error(Errc::ConfigInvalid, "WAVECAST_SEED: expected a non-negative integer, got '" + std::string(raw) + "'");
  }
  return static_cast<std::uint64_t>(v);
}

/// WAVECAST_SEED replaces synth.seed and shifts the training seeds to S, S+1, ...
void apply_seed_override(Invocation& inv) {
  if (!inv.seed_override) return;
  const auto s = *inv.seed_override;
  if (inv.command == "synth") {
    inv.config.set("synth.seed", std::to_string(s));
  } else if (inv.command == "train") {
    const auto count = TrainConfig::from_config(inv.config).seeds.size();
    std::string list;
    for (std::size_t n = 0; n < count; ++n) list += (n ? "," : "") + std::to_string(s + n);
    inv.config.set("train.seeds", list);
  }
}

void check_inputs_exist(const std::vector<std::string>& inputs) {
  for (const auto& p : inputs) {
    if (!fs::is_regular_file(p)) throw Error(Errc::Io, "input file not found: " + p);
  }
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces

std::vector<Sample> window_all(const std::vector<VehiclePair>& pairs, const WindowSpec& spec,
                               const NewellParams& params) {
  std::vector<Sample> all;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    auto set = build_windows(pairs[p], spec, params, p);
    std::cerr << "pair " << p << ": " << set.samples.size() << " windows (" << set.skipped_sigma
              << " skipped for a short shift, " << set.skipped_history << " for missing history)\n";
    all.insert(all.end(), std::make_move_iterator(set.samples.begin()), std::make_move_iterator(set.samples.end()));
  }
  return all;
}

std::vector<VehiclePair> load_pairs(const std::vector<std::string>& paths) {
  std::vector<VehiclePair> pairs;
  for (const auto& p : paths) pairs.push_back(load_pair(p));
  return pairs;
}

std::string seed_params_name(std::uint64_t seed) { return "seed_" + std::to_string(seed) + ".params"; }

constexpr const char* kBaselineParams = "baseline.params";

// ---------------------------------------------------------------------------
// synth

void run_synth(Invocation& inv) {
  const auto cfg = SynthConfig::from_config(inv.config);
  std::vector<std::string> outputs;
  for (std::size_t p = 0; p < cfg.pair_gap_target.size(); ++p) outputs.push_back("pair_" + std::to_string(p) + ".csv");
  ensure_dir(inv.out_dir);
  write_manifest(inv, inv.out_dir / "manifest.json", {cfg.seed}, outputs);

  const auto pairs = add_measurement_noise(synth_generate(cfg), cfg);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    write_file(inv.out_dir / outputs[p], [&](std::ostream& out) { export_csv(pairs[p], out); });
    std::cerr << "wrote " << (inv.out_dir / outputs[p]).string() << " (" << pairs[p].size() << " rows)\n";
  }
}

// ---------------------------------------------------------------------------
// train

void run_train(Invocation& inv) {
  const auto kind = parse_model_flag(inv.options.at("model").get<std::string>());
  const std::string flag(model_flag(kind));
  const auto window = WindowSpec::from_config(inv.config);
  const auto params = NewellParams::from_config(inv.config);
  const auto split_spec = SplitSpec::from_config(inv.config);
  const auto train_cfg = TrainConfig::from_config(inv.config);
  const auto model_cfg = ModelConfig::from(window, inv.config);
  check_inputs_exist(inv.inputs);

  const auto seeds = is_learned(kind) ? train_cfg.seeds : std::vector<std::uint64_t>{};
  std::vector<std::string> outputs{flag + "/config.cfg"};
  if (is_learned(kind)) {
    for (auto s : seeds) {
      outputs.push_back(flag + "/" + seed_params_name(s));
      outputs.push_back(flag + "/loss_seed_" + std::to_string(s) + ".csv");
    }
  } else {
    outputs.push_back(flag + "/" + kBaselineParams);
  }
  const fs::path model_dir = inv.out_dir / flag;
  ensure_dir(model_dir);
  write_manifest(inv, model_dir / "manifest.json", seeds, outputs);
  write_text(model_dir / "config.cfg", inv.config.to_string());

  if (!is_learned(kind)) {
    // physics baselines have nothing to fit
    const auto sentinel = init_params(kind, model_cfg);
    write_file(model_dir / kBaselineParams, [&](std::ostream& out) { nn::save_params(sentinel, out); }, true);
    std::cerr << model_display_name(kind) << " needs no training; wrote " << (model_dir / kBaselineParams).string()
              << "\n";
    return;
  }

  const auto pairs = load_pairs(inv.inputs);
  const auto splits = split(window_all(pairs, window, params), split_spec);
  std::cerr << "train " << splits.train.size() << ", val " << splits.val.size() << ", test " << splits.test.size()
            << " samples\n";
  const auto stats = fit_norm(splits.train);

  const auto started = std::chrono::steady_clock::now();
  const auto outcomes = multi_seed(kind, model_cfg, train_cfg, splits.train, splits.val, stats, inv.jobs,
                                   [](std::uint64_t seed, const EpochLoss& e) {
                                     std::fprintf(stderr, "seed %llu epoch %zu train %.6g val %.6g\n",
                                                  static_cast<unsigned long long>(seed), e.epoch, e.train_loss,
                                                  e.val_loss);
                                   });
  std::size_t failed = 0;
  std::string first_error;
  for (const auto& o : outcomes) {
    if (o.error) {
      ++failed;
      if (first_error.empty()) first_error = o.error->what();
      std::cerr << "seed " << o.seed << " failed: " << o.error->what() << "\n";
      continue;
    }
    const auto& rec = *o.record;
    write_file(model_dir / seed_params_name(o.seed), [&](std::ostream& out) { nn::save_params(rec.best_params, out); },
               true);
    write_file(model_dir / ("loss_seed_" + std::to_string(o.seed) + ".csv"),
               [&](std::ostream& out) { write_loss_csv(rec, out); });
    std::fprintf(stderr, "seed %llu: best epoch %zu, val loss %.6g, %.1f s\n", static_cast<unsigned long long>(o.seed),
                 rec.best_epoch, rec.best_val_loss, rec.wall_seconds);
  }
  std::fprintf(stderr, "trained %zu of %zu seeds in %.1f s\n", outcomes.size() - failed, outcomes.size(),
               std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  if (failed) {
    throw Error(Errc::Divergence, std::to_string(failed) + " of " + std::to_string(outcomes.size()) +
                                      " seeds failed; first: " + first_error);
  }
}

// ---------------------------------------------------------------------------
// eval

std::vector<std::pair<std::uint64_t, fs::path>> seed_files(const fs::path& dir) {
  std::vector<std::pair<std::uint64_t, fs::path>> found;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("seed_", 0) != 0 || entry.path().extension() != ".params") continue;
    long long s = 0;
    if (wavecast::detail::parse_int(name.substr(5, name.size() - 5 - 7), s) && s >= 0) {
      found.emplace_back(static_cast<std::uint64_t>(s), entry.path());
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

std::size_t meta_count(const nn::ParamSet& ps, const std::string& key, const std::string& path) {
  auto it = ps.meta().find(key);
  long long v = 0;
  if (it == ps.meta().end() || !wavecast::detail::parse_int(it->second, v) || v < 1) {
    throw Error(Errc::FormatError, path + ": missing or invalid '" + key + "' metadata");
  }
  return static_cast<std::size_t>(v);
}

ModelKind meta_kind(const nn::ParamSet& ps, const std::string& path) {
  auto it = ps.meta().find("model");
  if (it == ps.meta().end()) throw Error(Errc::FormatError, path + ": no model metadata");
  return parse_model_flag(it->second);
}

/// Architecture stored with a parameter file.
ModelConfig meta_model(const nn::ParamSet& ps, const std::string& path) {
  ModelConfig m;
  m.k = meta_count(ps, "k", path);
  m.l = meta_count(ps, "l", path);
  m.k_under = meta_count(ps, "k_under", path);
  m.hidden = meta_count(ps, "hidden", path);
  return m;
}

/// Parameter files an eval over `models` reads, by model.
std::vector<std::vector<fs::path>> eval_param_files(const fs::path& run_dir, const std::vector<ModelKind>& models) {
  std::vector<std::vector<fs::path>> files;
  for (auto kind : models) {
    std::vector<fs::path> paths;
    if (is_learned(kind)) {
      const auto dir = run_dir / std::string(model_flag(kind));
      for (auto& [seed, path] : seed_files(dir)) paths.push_back(path);
      if (paths.empty()) {
        throw Error(Errc::MissingParamset, "no trained parameters for " + std::string(model_flag(kind)) + " in " +
                                               dir.string());
      }
    }
    files.push_back(std::move(paths));
  }
  return files;
}

std::vector<ModelKind> parse_models(const json& list) {
  std::vector<ModelKind> models;
  for (const auto& m : list) {
    const auto kind = parse_model_flag(m.get<std::string>());
    if (std::find(models.begin(), models.end(), kind) != models.end()) {
      throw Error(Errc::ConfigInvalid, "model listed twice: " + m.get<std::string>());
    }
    models.push_back(kind);
  }
  if (models.empty()) throw Error(Errc::ConfigInvalid, "no models to evaluate");
  return models;
}

// 10/20/30/40 s for the standard horizon, quarters of l otherwise.
std::vector<std::size_t> report_horizons(std::size_t l) {
  if (l == 400) return {100, 200, 300, 400};
  std::vector<std::size_t> hs;
  for (std::size_t q = 1; q <= 4; ++q) {
    const std::size_t h = std::max<std::size_t>(1, l * q / 4);
    if (hs.empty() || hs.back() != h) hs.push_back(h);
  }
  return hs;
}

void run_eval(Invocation& inv) {
  const auto models = parse_models(inv.options.at("models"));
  const auto n_data = inv.options.at("data_count").get<std::size_t>();
  const std::vector<std::string> data(inv.inputs.begin(), inv.inputs.begin() + static_cast<long>(n_data));
  const auto window = WindowSpec::from_config(inv.config);
  const auto params = NewellParams::from_config(inv.config);
  const auto split_spec = SplitSpec::from_config(inv.config);
  check_inputs_exist(inv.inputs);

  const std::vector<std::string> outputs{"report.csv", "report.json", "report.txt", "ve_curve.csv"};
  ensure_dir(inv.out_dir);
  write_manifest(inv, inv.out_dir / "manifest.json", {}, outputs);

  const auto pairs = load_pairs(data);
  const auto test = split(window_all(pairs, window, params), split_spec).test;
  std::cerr << "evaluating on " << test.size() << " test samples\n";

  std::vector<MethodRuns> runs;
  std::size_t file_index = n_data;
  for (auto kind : models) {
    MethodRuns mr;
    mr.name = std::string(model_display_name(kind));
    auto collect = [&](nn::ParamSet& ps, const ModelConfig& mc, const NormStats& stats) {
      PredictionSet set;
      for (const auto& s : test) {
        set.keys.emplace_back(s.pair_id, s.t_index);
        set.predictions.push_back(predict(kind, mc, ps, s, stats));
        set.truths.push_back(s.target);
      }
      mr.seeds.push_back(std::move(set));
    };
    if (!is_learned(kind)) {
      nn::ParamSet none;
      ModelConfig mc;
      mc.k = window.k;
      mc.l = window.l;
      mc.k_under = window.k_under;
      collect(none, mc, NormStats{});
    } else {
      const std::size_t count = inv.options.at("param_counts").at(std::string(model_flag(kind))).get<std::size_t>();
      for (std::size_t n = 0; n < count; ++n) {
        const auto& path = inv.inputs[file_index++];
        auto ps = nn::load_params(path);
        if (meta_kind(ps, path) != kind) {
          throw Error(Errc::ConfigInvalid, path + " holds a different model");
        }
        const auto mc = meta_model(ps, path);
        if (mc.k != window.k || mc.l != window.l || mc.k_under != window.k_under) {
          throw Error(Errc::ConfigInvalid, path + " was trained with a different window (k, l, k_under)");
        }
        const auto stats = stored_norm(ps);
        if (!stats) throw Error(Errc::FormatError, path + ": no normalization metadata");
        collect(ps, mc, *stats);
      }
    }
    runs.push_back(std::move(mr));
  }

  const auto rep = report(runs, report_horizons(window.l));
  write_file(inv.out_dir / "report.csv", [&](std::ostream& out) { write_report_csv(rep, out); });
  write_text(inv.out_dir / "report.json", report_json(rep).dump(2) + "\n");
  const auto table = render_table(rep);
  write_text(inv.out_dir / "report.txt", table);
  write_file(inv.out_dir / "ve_curve.csv", [&](std::ostream& out) { write_ve_curve_csv(rep, out); });
  std::cout << table;
}

// ---------------------------------------------------------------------------
// predict

json forecast_json(ModelKind kind, const Sample& s, const std::vector<double>& model, double t) {
  json j;
  j["method"] = std::string(model_display_name(kind));
  j["index"] = s.t_index;
  j["t_s"] = t;
  j["shift_s"] = s.shift_s;
  std::vector<double> horizon(s.target.size());
  for (std::size_t n = 0; n < horizon.size(); ++n) horizon[n] = steps_to_seconds(static_cast<double>(n + 1));
  j["horizon_s"] = horizon;
  j["truth"] = s.target;
  j["newell"] = s.newell_future;
  j["constant"] = std::vector<double>(s.target.size(), s.ego_history.back());
  j["model"] = model;
  return j;
}

void run_predict(Invocation& inv) {
  const auto& params_path = inv.inputs.at(0);
  const auto& data_path = inv.inputs.at(1);
  const auto index = inv.options.at("index").get<std::size_t>();
  const auto newell = NewellParams::from_config(inv.config);
  check_inputs_exist(inv.inputs);

  const bool to_dir = !inv.out_dir.empty();
  if (to_dir) {
    ensure_dir(inv.out_dir);
    write_manifest(inv, inv.out_dir / "manifest.json", {}, {"forecast.json"});
  }
  auto ps = nn::load_params(params_path);
  const auto kind = meta_kind(ps, params_path);
  const auto mc = meta_model(ps, params_path);
  WindowSpec spec;
  spec.k = mc.k;
  spec.l = mc.l;
  spec.k_under = mc.k_under;
  const auto pair = load_pair(data_path);
  const auto sample = make_sample(pair, index, spec, newell);
  NormStats stats;
  if (is_learned(kind)) {
    const auto stored = stored_norm(ps);
    if (!stored) throw Error(Errc::FormatError, params_path + ": no normalization metadata");
    stats = *stored;
  }
  const auto model = predict(kind, mc, ps, sample, stats);
  const auto text = forecast_json(kind, sample, model, pair.time(index)).dump(2) + "\n";
  if (to_dir) write_text(inv.out_dir / "forecast.json", text);
  else std::cout << text;
}

// ---------------------------------------------------------------------------
// dispatch and rerun

void run(Invocation& inv) {
  if (inv.command == "synth") run_synth(inv);
  else if (inv.command == "train") run_train(inv);
  else if (inv.command == "eval") run_eval(inv);
  else if (inv.command == "predict") run_predict(inv);
  else throw Error(Errc::FormatError, "unknown command '" + inv.command + "' in manifest");
}

Config load_config(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

/// Replays a manifest. Inputs must still hash to the recorded digests.
void run_rerun(const std::string& manifest_path, const std::string& out_override, std::size_t jobs) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, manifest_path + ": " + e.what());
  }
  Invocation inv;
  try {
    inv.command = m.at("command").get<std::string>();
    inv.options = m.at("options");
    for (const auto& [k, v] : m.at("config").items()) inv.config.set(k, v.get<std::string>());
    if (m.contains("seed_override")) inv.seed_override = m.at("seed_override").get<std::uint64_t>();
    for (const auto& rec : m.at("inputs")) {
      const auto path = rec.at("path").get<std::string>();
      const auto expected = rec.at("sha256").get<std::string>();
      if (!fs::is_regular_file(path)) throw Error(Errc::Io, "input file not found: " + path);
      if (sha256_file(path) != expected) throw Error(Errc::Io, "input changed since the recorded run: " + path);
      inv.inputs.push_back(path);
    }
  } catch (const json::exception& e) {
    throw Error(Errc::FormatError, manifest_path + ": " + e.what());
  }
  // train manifests live one level below the run directory
  fs::path dir = fs::path(manifest_path).parent_path();
  if (inv.command == "train") dir = dir.parent_path();
  inv.out_dir = out_override.empty() ? dir : fs::path(out_override);
  inv.jobs = jobs;
  run(inv);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavecast: lead/ego velocity forecasting with Newell's model and residual LSTMs"};
  app.set_version_flag("--version", WAVECAST_VERSION);
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::size_t jobs = 1;

  auto* synth = app.add_subcommand("synth", "Generate noisy synthetic lead/ego pairs from an OVM platoon");
  synth->add_option("-c,--config", config_path, "Scenario config (key = value)")->required();
  synth->add_option("-o,--out", out_path, "Output directory")->required();

  std::string model_flag_arg;
  std::vector<std::string> data;
  auto* train_cmd = app.add_subcommand("train", "Train one method on pair CSVs, one run per seed");
  train_cmd->add_option("-c,--config", config_path, "Experiment config")->required();
  train_cmd->add_option("--model", model_flag_arg, "constant|newell|vel-fc|ego-lstm|vel-lstm|res-lstm")->required();
  train_cmd->add_option("data", data, "Pair CSV files")->required();
  train_cmd->add_option("-o,--out", out_path, "Run directory")->required();
  train_cmd->add_option("--jobs", jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber);

  std::string run_dir, models_arg = "constant,newell,vel-fc,ego-lstm,vel-lstm,res-lstm";
  auto* eval = app.add_subcommand("eval", "Evaluate methods on the test split and write the report");
  eval->add_option("run_dir", run_dir, "Run directory written by train")->required();
  eval->add_option("data", data, "Pair CSV files")->required();
  eval->add_option("--models", models_arg, "Comma-separated methods");
  eval->add_option("-c,--config", config_path, "Experiment config (default: the run's saved config)");
  eval->add_option("-o,--out", out_path, "Report directory (default: <run_dir>/eval)");

  std::string params_path, data_path;
  std::size_t index = 0;
  auto* predict_cmd = app.add_subcommand("predict", "Forecast a single window");
  predict_cmd->add_option("params", params_path, "Parameter file (seed_*.params or baseline.params)")->required();
  predict_cmd->add_option("data", data_path, "Pair CSV file")->required();
  predict_cmd->add_option("-i,--index", index, "Prediction index i")->required();
  predict_cmd->add_option("-c,--config", config_path, "Config with the Newell wave speed (default: next to params)");
  predict_cmd->add_option("-o,--out", out_path, "Output directory (default: print to stdout)");

  std::string manifest_path;
  auto* rerun = app.add_subcommand("rerun", "Re-run a command from its manifest.json");
  rerun->add_option("manifest", manifest_path, "manifest.json")->required();
  rerun->add_option("-o,--out", out_path, "Output directory (default: the original one)");
  rerun->add_option("--jobs", jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (rerun->parsed()) {
      run_rerun(manifest_path, out_path, jobs);
      return 0;
    }
    Invocation inv;
    inv.jobs = jobs;
    inv.seed_override = env_seed();
    if (synth->parsed()) {
      inv.command = "synth";
      inv.config = Config::load(config_path);
      inv.out_dir = out_path;
    } else if (train_cmd->parsed()) {
      inv.command = "train";
      inv.config = Config::load(config_path);
      inv.options["model"] = std::string(model_flag(parse_model_flag(model_flag_arg)));
      for (const auto& d : data) inv.inputs.push_back(absolute_path(d));
      inv.out_dir = out_path;
    } else if (eval->parsed()) {
      inv.command = "eval";
      json list = json::array();
      for (auto part : wavecast::detail::split(models_arg, ',')) list.push_back(std::string(part));
      const auto models = parse_models(list);
      const fs::path dir = absolute_path(run_dir);
      if (config_path.empty()) {
        for (auto kind : models) {
          const auto candidate = dir / std::string(model_flag(kind)) / "config.cfg";
          if (fs::is_regular_file(candidate)) {
            config_path = candidate.string();
            break;
          }
        }
        if (config_path.empty()) throw Error(Errc::ConfigInvalid, "no saved config in " + dir.string() + "; pass -c");
      }
      inv.config = Config::load(config_path);
      for (const auto& d : data) inv.inputs.push_back(absolute_path(d));
      const auto files = eval_param_files(dir, models);
      json counts = json::object();
      for (std::size_t m = 0; m < models.size(); ++m) {
        if (is_learned(models[m])) counts[std::string(model_flag(models[m]))] = files[m].size();
        for (const auto& f : files[m]) inv.inputs.push_back(f.string());
      }
      inv.options["run_dir"] = dir.string();
      inv.options["models"] = list;
      inv.options["data_count"] = data.size();
      inv.options["param_counts"] = counts;
      inv.out_dir = out_path.empty() ? dir / "eval" : fs::path(out_path);
    } else if (predict_cmd->parsed()) {
      inv.command = "predict";
      const auto sibling = fs::path(params_path).parent_path() / "config.cfg";
      if (config_path.empty() && fs::is_regular_file(sibling)) config_path = sibling.string();
      inv.config = load_config(config_path);
      inv.inputs = {absolute_path(params_path), absolute_path(data_path)};
      inv.options["index"] = index;
      inv.out_dir = out_path;
    }
    apply_seed_override(inv);
    run(inv);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
