#pragma once

// Mini-batch Adam training with validation early stopping, and the multi-seed
// protocol used for mean +- std reporting.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "wavecast/config.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/error.hpp"
#include "wavecast/models.hpp"
#include "wavecast/nn.hpp"

namespace wavecast {

struct TrainConfig {
  double lr = 0.0005;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::size_t batch_size = 32;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::optional<double> clip_norm = 5.0;
  /// Training aborts with Divergence when an epoch's loss exceeds this multiple
  /// of the initial loss, or becomes non-finite.
  double divergence_ratio = 1e6;

  void validate() const {
    if (!(lr >= 0.0)) throw Error(Errc::ConfigInvalid, "train.lr: must be >= 0");
    if (patience < 1) throw Error(Errc::ConfigInvalid, "train.patience: must be >= 1");
    if (batch_size < 1) throw Error(Errc::ConfigInvalid, "train.batch_size: must be >= 1");
    if (seeds.empty()) throw Error(Errc::ConfigInvalid, "train.seeds: need at least one seed");
    if (clip_norm && !(*clip_norm > 0.0)) throw Error(Errc::ConfigInvalid, "train.clip_norm: must be > 0 or none");
  }

  static TrainConfig from_config(const Config& cfg) {
    TrainConfig t;
    t.lr = cfg.get_double("train.lr", t.lr);
    auto count = [&](const char* key, std::size_t fallback, long long min) {
      const auto v = cfg.get_int(key, static_cast<long long>(fallback));
      if (v < min) throw Error(Errc::ConfigInvalid, std::string(key) + ": must be >= " + std::to_string(min));
      return static_cast<std::size_t>(v);
    };
    t.max_epochs = count("train.max_epochs", t.max_epochs, 0);
    t.patience = count("train.patience", t.patience, 1);
    t.batch_size = count("train.batch_size", t.batch_size, 1);
    if (cfg.has("train.seeds")) {
      t.seeds.clear();
      for (auto s : cfg.get_ints("train.seeds", {})) {
        if (s < 0) throw Error(Errc::ConfigInvalid, "train.seeds: seeds must be >= 0");
        t.seeds.push_back(static_cast<std::uint64_t>(s));
      }
    }
    const auto clip = cfg.get_string("train.clip_norm", "5.0");
    if (clip == "none") t.clip_norm.reset();
    else t.clip_norm = cfg.get_double("train.clip_norm", 5.0);
    t.divergence_ratio = cfg.get_double("train.divergence_ratio", t.divergence_ratio);
    t.validate();
    return t;
  }
};

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;

  friend bool operator==(const EpochLoss&, const EpochLoss&) = default;
};

struct RunRecord {
  std::uint64_t seed = 0;
  /// Row 0 is the untrained model; row e is the state after epoch e (train
  /// loss is the running mean over that epoch's batches).
  std::vector<EpochLoss> history;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  nn::ParamSet best_params;
  double wall_seconds = 0.0;

  /// Everything except wall time.
  bool same_result(const RunRecord& o) const {
    return seed == o.seed && history == o.history && best_epoch == o.best_epoch &&
           best_val_loss == o.best_val_loss && best_params == o.best_params;
  }
};

/// Pre-assembled normalized inputs and targets.
struct PreparedSet {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
  std::size_t size() const { return inputs.size(); }
};

inline PreparedSet prepare(ModelKind kind, const ModelConfig& cfg, const std::vector<Sample>& samples,
                           const NormStats& stats) {
  PreparedSet p;
  p.inputs.reserve(samples.size());
  p.targets.reserve(samples.size());
  for (const auto& s : samples) {
    p.inputs.push_back(assemble_input(kind, s, stats, cfg));
    p.targets.push_back(training_target(kind, s, stats));
  }
  return p;
}

inline double sample_loss(ModelKind kind, const ModelConfig& cfg, nn::ParamSet& ps, const std::vector<double>& x,
                          const std::vector<double>& y) {
  const auto out = forward_raw(kind, cfg, ps, x);
  double acc = 0.0;
  for (std::size_t j = 0; j < out.size(); ++j) acc += (out[j] - y[j]) * (out[j] - y[j]);
  return acc / static_cast<double>(out.size());
}

/// Mean per-sample MSE over a prepared set.
inline double evaluate_mse(ModelKind kind, const ModelConfig& cfg, nn::ParamSet& ps, const PreparedSet& set) {
  if (set.size() == 0) throw Error(Errc::EmptySplit, "cannot evaluate on an empty set");
  double acc = 0.0;
  for (std::size_t n = 0; n < set.size(); ++n) acc += sample_loss(kind, cfg, ps, set.inputs[n], set.targets[n]);
  return acc / static_cast<double>(set.size());
}

using EpochCallback = std::function<void(std::uint64_t seed, const EpochLoss&)>;

inline RunRecord train(ModelKind kind, ModelConfig model_cfg, const TrainConfig& cfg, const std::vector<Sample>& train_set,
                       const std::vector<Sample>& val_set, const NormStats& stats, std::uint64_t seed,
                       const EpochCallback& on_epoch = {}) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  model_cfg.seed = seed;
  RunRecord rec;
  rec.seed = seed;
  rec.best_params = init_params(kind, model_cfg);
  store_norm(rec.best_params, stats);
  if (!is_learned(kind)) return rec;
  if (train_set.empty()) throw Error(Errc::EmptySplit, "train split is empty");
  if (val_set.empty()) throw Error(Errc::EmptySplit, "validation split is empty");

  const auto train_data = prepare(kind, model_cfg, train_set, stats);
  const auto val_data = prepare(kind, model_cfg, val_set, stats);
  nn::ParamSet params = rec.best_params;
  const nn::AdamConfig adam{cfg.lr};

  const double initial_train = evaluate_mse(kind, model_cfg, params, train_data);
  const double initial_val = evaluate_mse(kind, model_cfg, params, val_data);
  rec.history.push_back({0, initial_train, initial_val});
  rec.best_val_loss = initial_val;
  if (on_epoch) on_epoch(seed, rec.history.back());

  // decorrelated from the initialization stream
  std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      params.zero_grad();
      for (std::size_t n = start; n < stop; ++n) {
        const auto idx = order[n];
        ad::Graph g;
        auto out = forward(g, kind, model_cfg, params, train_data.inputs[idx]);
        auto target = g.constant(train_data.targets[idx]);
        auto loss = ad::mse(out, target);
        const double value = g.scalar(loss);
        if (!std::isfinite(value)) {
          throw Error(Errc::Divergence, "non-finite loss in epoch " + std::to_string(epoch));
        }
        epoch_loss += value;
        g.backward(ad::scale(loss, inv_batch));
      }
      if (cfg.clip_norm) {
        const double norm = params.grad_norm();
        if (!std::isfinite(norm)) throw Error(Errc::Divergence, "non-finite gradient in epoch " + std::to_string(epoch));
        if (norm > *cfg.clip_norm) params.scale_grads(*cfg.clip_norm / norm);
      }
      nn::adam_step(params, adam);
    }
    epoch_loss /= static_cast<double>(order.size());
    const double val_loss = evaluate_mse(kind, model_cfg, params, val_data);
    if (!std::isfinite(epoch_loss) || !std::isfinite(val_loss) ||
        epoch_loss > cfg.divergence_ratio * std::max(initial_train, 1e-12)) {
      throw Error(Errc::Divergence, "loss " + std::to_string(epoch_loss) + " after epoch " + std::to_string(epoch));
    }
    rec.history.push_back({epoch, epoch_loss, val_loss});
    if (on_epoch) on_epoch(seed, rec.history.back());
    if (val_loss < rec.best_val_loss) {
      rec.best_val_loss = val_loss;
      rec.best_epoch = epoch;
      rec.best_params = params;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  rec.best_params.moments().clear();
  rec.best_params.zero_grad();
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return rec;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<RunRecord> record;
  std::optional<Error> error;
};

/// One independent training run per seed, `jobs` at a time. A failing seed is
/// reported in its outcome and does not stop the others.
inline std::vector<SeedOutcome> multi_seed(ModelKind kind, const ModelConfig& model_cfg, const TrainConfig& cfg,
                                           const std::vector<Sample>& train_set, const std::vector<Sample>& val_set,
                                           const NormStats& stats, std::size_t jobs = 1,
                                           const EpochCallback& on_epoch = {}) {
  cfg.validate();
  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mutex;
  EpochCallback guarded;
  if (on_epoch) {
    guarded = [&](std::uint64_t seed, const EpochLoss& e) {
      std::lock_guard lock(callback_mutex);
      on_epoch(seed, e);
    };
  }
  auto worker = [&] {
    for (std::size_t n = next++; n < outcomes.size(); n = next++) {
      outcomes[n].seed = cfg.seeds[n];
      try {
        outcomes[n].record = train(kind, model_cfg, cfg, train_set, val_set, stats, cfg.seeds[n], guarded);
      } catch (const Error& e) {
        outcomes[n].error = e;
      }
    }
  };
  jobs = std::clamp<std::size_t>(jobs, 1, outcomes.size());
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

inline void write_loss_csv(const RunRecord& rec, std::ostream& out) {
  out << "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& e : rec.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", e.epoch, e.train_loss, e.val_loss);
    out << buf;
  }
}

}  // namespace wavecast
