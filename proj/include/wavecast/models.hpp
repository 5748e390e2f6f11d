#pragma once

// The six forecasting methods: two physics baselines and four learned
// encoder/decoder networks, plus input assembly and velocity reconstruction.

#include <algorithm>
#include <array>
#include <cstdio>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/config.hpp"
#include "wavecast/dataset.hpp"
#include "wavecast/error.hpp"
#include "wavecast/nn.hpp"

namespace wavecast {

enum class ModelKind { ConstantVelocity, Newell, VelFC, EgoOnlyLSTMFC, VelLSTMFC, ResLSTMFC };

/// Report row order.
inline constexpr std::array<ModelKind, 6> kAllModels = {ModelKind::ConstantVelocity, ModelKind::Newell,
                                                        ModelKind::VelFC,            ModelKind::EgoOnlyLSTMFC,
                                                        ModelKind::VelLSTMFC,        ModelKind::ResLSTMFC};

constexpr std::string_view model_flag(ModelKind k) {
  switch (k) {
    case ModelKind::ConstantVelocity: return "constant";
    case ModelKind::Newell: return "newell";
    case ModelKind::VelFC: return "vel-fc";
    case ModelKind::EgoOnlyLSTMFC: return "ego-lstm";
    case ModelKind::VelLSTMFC: return "vel-lstm";
    case ModelKind::ResLSTMFC: return "res-lstm";
  }
  return "";
}

constexpr std::string_view model_display_name(ModelKind k) {
  switch (k) {
    case ModelKind::ConstantVelocity: return "Constant Velocity";
    case ModelKind::Newell: return "Newell (translated)";
    case ModelKind::VelFC: return "Vel-FC";
    case ModelKind::EgoOnlyLSTMFC: return "Ego-only LSTM-FC";
    case ModelKind::VelLSTMFC: return "VelLSTM-FC";
    case ModelKind::ResLSTMFC: return "ResLSTM-FC";
  }
  return "";
}

inline ModelKind parse_model_flag(std::string_view flag) {
  for (auto k : kAllModels) {
    if (model_flag(k) == flag) return k;
  }
  throw Error(Errc::ConfigInvalid, "unknown model '" + std::string(flag) +
                                       "' (expected constant|newell|vel-fc|ego-lstm|vel-lstm|res-lstm)");
}

constexpr bool is_learned(ModelKind k) { return k != ModelKind::ConstantVelocity && k != ModelKind::Newell; }

struct ModelConfig {
  std::size_t k = 600;
  std::size_t l = 400;
  std::size_t k_under = 300;
  std::size_t hidden = 200;
  std::uint64_t seed = 1;

  static ModelConfig from(const WindowSpec& w, const Config& cfg) {
    ModelConfig m;
    m.k = w.k;
    m.l = w.l;
    m.k_under = w.k_under;
    const auto hidden = cfg.get_int("model.hidden", static_cast<long long>(m.hidden));
    if (hidden < 1) throw Error(Errc::ConfigInvalid, "model.hidden: must be >= 1");
    m.hidden = static_cast<std::size_t>(hidden);
    m.seed = static_cast<std::uint64_t>(cfg.get_int("model.seed", static_cast<long long>(m.seed)));
    return m;
  }
};

/// Length of the flat input sequence each learned model consumes.
inline std::size_t input_length(ModelKind kind, const ModelConfig& cfg) {
  switch (kind) {
    case ModelKind::EgoOnlyLSTMFC: return cfg.k;
    case ModelKind::VelFC:
    case ModelKind::VelLSTMFC: return cfg.k + cfg.l;
    case ModelKind::ResLSTMFC: return cfg.k + (cfg.k_under + cfg.l) + cfg.k;
    default: return 0;
  }
}

/// Normalized flat input:
///   Ego-only: v_E(i-k+1:i)
///   Vel-FC, VelLSTM-FC: [v_E(i-k+1:i)  ~v_E(i,1:l)]
///   ResLSTM-FC: [v_E(i-k+1:i)  ~v_E(i,-k_under+1:l)  R(i,-k+1:0)]
inline std::vector<double> assemble_input(ModelKind kind, const Sample& s, const NormStats& stats,
                                          const ModelConfig& cfg) {
  if (!is_learned(kind)) throw Error(Errc::LengthMismatch, "physics baselines take no network input");
  if (s.ego_history.size() != cfg.k || s.newell_future.size() != cfg.l ||
      s.newell_extended.size() != cfg.k_under + cfg.l || s.residual_history.size() != cfg.k) {
    throw Error(Errc::LengthMismatch, "sample lengths do not match the model configuration");
  }
  std::vector<double> x;
  x.reserve(input_length(kind, cfg));
  for (double v : s.ego_history) x.push_back(stats.apply(v));
  if (kind == ModelKind::VelFC || kind == ModelKind::VelLSTMFC) {
    for (double v : s.newell_future) x.push_back(stats.apply(v));
  } else if (kind == ModelKind::ResLSTMFC) {
    for (double v : s.newell_extended) x.push_back(stats.apply(v));
    for (double r : s.residual_history) x.push_back(stats.apply_residual(r));
  }
  return x;
}

/// Normalized training target: residuals for ResLSTM-FC, velocities otherwise.
inline std::vector<double> training_target(ModelKind kind, const Sample& s, const NormStats& stats) {
  std::vector<double> y(s.target.size());
  if (kind == ModelKind::ResLSTMFC) {
    const auto r = s.target_residual();
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = stats.apply_residual(r[j]);
  } else {
    for (std::size_t j = 0; j < y.size(); ++j) y[j] = stats.apply(s.target[j]);
  }
  return y;
}

namespace detail {

inline std::string meta_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Freshly initialized parameters for a learned model; empty for the baselines.
inline nn::ParamSet init_params(ModelKind kind, const ModelConfig& cfg) {
  nn::ParamSet ps;
  ps.meta()["model"] = std::string(model_flag(kind));
  ps.meta()["k"] = std::to_string(cfg.k);
  ps.meta()["l"] = std::to_string(cfg.l);
  ps.meta()["k_under"] = std::to_string(cfg.k_under);
  ps.meta()["hidden"] = std::to_string(cfg.hidden);
  if (!is_learned(kind)) return ps;
  std::mt19937_64 rng(cfg.seed);
  if (kind == ModelKind::VelFC) {
    nn::init_linear(ps, "fc1", input_length(kind, cfg), cfg.hidden, rng);
    nn::init_linear(ps, "fc2", cfg.hidden, cfg.hidden, rng);
    nn::init_linear(ps, "fc3", cfg.hidden, cfg.l, rng);
  } else {
    nn::init_lstm_encoder(ps, cfg.hidden, rng, "enc");
    nn::init_linear(ps, "dec", cfg.hidden, cfg.l, rng);
  }
  return ps;
}

/// Raw network output (length l, normalized units) recorded on `g`.
inline ad::Var forward(ad::Graph& g, ModelKind kind, const ModelConfig& cfg, nn::ParamSet& ps,
                       std::span<const double> input) {
  if (!is_learned(kind)) throw Error(Errc::ShapeMismatch, "physics baselines have no network forward pass");
  if (input.size() != input_length(kind, cfg)) {
    throw Error(Errc::ShapeMismatch, "input of length " + std::to_string(input.size()) + ", expected " +
                                         std::to_string(input_length(kind, cfg)));
  }
  if (kind == ModelKind::VelFC) {
    auto x = g.constant(ad::Tensor({input.size()}, std::vector<double>(input.begin(), input.end())));
    auto h1 = ad::relu(nn::linear(g, x, ps, "fc1"));
    auto h2 = ad::relu(nn::linear(g, h1, ps, "fc2"));
    return nn::linear(g, h2, ps, "fc3");
  }
  auto h = nn::lstm_encode(g, input, ps, "enc");
  return nn::linear(g, h, ps, "dec");
}

/// Inference-only forward pass.
inline std::vector<double> forward_raw(ModelKind kind, const ModelConfig& cfg, nn::ParamSet& ps,
                                       std::span<const double> input) {
  ad::Graph g;
  g.set_no_grad(true);
  auto y = forward(g, kind, cfg, ps, input);
  auto v = g.value(y);
  return {v.begin(), v.end()};
}

/// Velocity prediction from raw network output; residual models add the Newell
/// preview back. Clamped at 0 m/s.
inline std::vector<double> reconstruct(ModelKind kind, const std::vector<double>& raw, const Sample& s,
                                       const NormStats& stats) {
  if (raw.size() != s.newell_future.size()) {
    throw Error(Errc::LengthMismatch, "raw output of length " + std::to_string(raw.size()) + ", expected " +
                                          std::to_string(s.newell_future.size()));
  }
  std::vector<double> v(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    const double value = kind == ModelKind::ResLSTMFC ? stats.invert_residual(raw[j]) + s.newell_future[j]
                                                      : stats.invert(raw[j]);
    v[j] = std::max(0.0, value);
  }
  return v;
}

/// Velocity forecast v^_E(i, 1..l) for any method.
inline std::vector<double> predict(ModelKind kind, const ModelConfig& cfg, nn::ParamSet& ps, const Sample& s,
                                   const NormStats& stats) {
  switch (kind) {
    case ModelKind::ConstantVelocity: return std::vector<double>(cfg.l, s.ego_history.back());
    case ModelKind::Newell: return s.newell_future;
    default: break;
  }
  const auto x = assemble_input(kind, s, stats, cfg);
  return reconstruct(kind, forward_raw(kind, cfg, ps, x), s, stats);
}

/// Norm stats stored alongside trained parameters.
inline void store_norm(nn::ParamSet& ps, const NormStats& stats) {
  ps.meta()["norm_mean"] = detail::meta_number(stats.mean);
  ps.meta()["norm_std"] = detail::meta_number(stats.std);
}

inline std::optional<NormStats> stored_norm(const nn::ParamSet& ps) {
  auto m = ps.meta().find("norm_mean");
  auto s = ps.meta().find("norm_std");
  if (m == ps.meta().end() || s == ps.meta().end()) return std::nullopt;
  NormStats stats;
  if (!wavecast::detail::parse_double(m->second, stats.mean) || !wavecast::detail::parse_double(s->second, stats.std)) {
    throw Error(Errc::FormatError, "unreadable normalization metadata");
  }
  return stats;
}

}  // namespace wavecast
