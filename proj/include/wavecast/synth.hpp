#pragma once

// Synthetic congested-platoon data from the optimal velocity model (OVM).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/config.hpp"
#include "wavecast/error.hpp"
#include "wavecast/trajectory.hpp"

namespace wavecast {

struct SynthConfig {
  int n_vehicles = 60;
  double alpha = 1.0;   // 1/s
  double v_max = 30.0;  // m/s
  double h_stop = 5.0;  // m
  double h_go = 35.0;   // m
  /// (time s, target speed m/s), sorted by time; the lead tracks the active entry.
  std::vector<std::pair<double, double>> lead_profile{{0.0, 25.0}};
  /// One pair is produced per target gap.
  std::vector<double> pair_gap_target{900.0};
  double duration = 1000.0;  // s
  std::uint64_t seed = 1;
  /// Gain with which the lead tracks its profile (1/s); unset means alpha.
  std::optional<double> lead_gain;
  /// Std of random lead acceleration (m/s^2 per sqrt(s)); 0 gives a noise-free lead.
  double lead_accel_noise = 0.0;
  /// Measurement noise added to the emitted pairs after simulation.
  double noise_pos = 0.5;  // m
  double noise_vel = 0.3;  // m/s

  void validate() const {
    auto bad = [](const std::string& key, const std::string& why) {
      throw Error(Errc::ConfigInvalid, key + ": " + why);
    };
    if (n_vehicles < 2) bad("synth.n_vehicles", "must be >= 2");
    if (!(alpha > 0.0)) bad("synth.alpha", "must be > 0");
    if (!(v_max > 0.0)) bad("synth.v_max", "must be > 0");
    if (!(h_stop > 0.0)) bad("synth.h_stop", "must be > 0");
    if (!(h_stop < h_go)) bad("synth.h_stop", "must be < synth.h_go");
    if (!(duration > 0.0)) bad("synth.duration", "must be > 0");
    if (lead_profile.empty()) bad("synth.lead_profile", "must have at least one entry");
    for (std::size_t i = 0; i < lead_profile.size(); ++i) {
      if (lead_profile[i].second < 0.0) bad("synth.lead_profile", "speeds must be >= 0");
      if (i > 0 && !(lead_profile[i].first > lead_profile[i - 1].first)) {
        bad("synth.lead_profile", "times must be strictly increasing");
      }
    }
    if (pair_gap_target.empty()) bad("synth.pair_gap_target", "must have at least one entry");
    if (lead_gain && !(*lead_gain > 0.0)) bad("synth.lead_gain", "must be > 0");
    if (lead_accel_noise < 0.0) bad("synth.lead_accel_noise", "must be >= 0");
    if (noise_pos < 0.0) bad("synth.noise_pos", "must be >= 0");
    if (noise_vel < 0.0) bad("synth.noise_vel", "must be >= 0");
  }

  static SynthConfig from_config(const Config& cfg) {
    SynthConfig s;
    s.n_vehicles = static_cast<int>(cfg.get_int("synth.n_vehicles", s.n_vehicles));
    s.alpha = cfg.get_double("synth.alpha", s.alpha);
    s.v_max = cfg.get_double("synth.v_max", s.v_max);
    s.h_stop = cfg.get_double("synth.h_stop", s.h_stop);
    s.h_go = cfg.get_double("synth.h_go", s.h_go);
    s.lead_profile = cfg.get_pairs("synth.lead_profile", s.lead_profile);
    s.pair_gap_target = cfg.get_doubles("synth.pair_gap_target", s.pair_gap_target);
    s.duration = cfg.get_double("synth.duration", s.duration);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("synth.seed", static_cast<long long>(s.seed)));
    if (cfg.has("synth.lead_gain")) s.lead_gain = cfg.get_double("synth.lead_gain", s.alpha);
    s.lead_accel_noise = cfg.get_double("synth.lead_accel_noise", s.lead_accel_noise);
    s.noise_pos = cfg.get_double("synth.noise_pos", s.noise_pos);
    s.noise_vel = cfg.get_double("synth.noise_vel", s.noise_vel);
    s.validate();
    return s;
  }

  /// Optimal velocity function V(h).
  double optimal_velocity(double headway) const {
    return v_max * std::clamp((headway - h_stop) / (h_go - h_stop), 0.0, 1.0);
  }

  /// Smallest headway with V(h) = v, for 0 <= v <= v_max.
  double equilibrium_headway(double v) const {
    return h_stop + std::clamp(v / v_max, 0.0, 1.0) * (h_go - h_stop);
  }

  double target_speed(double t) const {
    double v = lead_profile.front().second;
    for (const auto& [time, speed] : lead_profile) {
      if (time <= t) v = speed;
      else break;
    }
    return v;
  }
};

/// Full platoon state history; row k is vehicle k (0 = platoon head).
struct PlatoonHistory {
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> velocities;
};

inline PlatoonHistory simulate_platoon(const SynthConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_vehicles);
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / kSamplePeriod)) + 1;
  const double dt = kSamplePeriod;

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  std::vector<double> x(n), v(n);
  const double v0 = std::min(cfg.target_speed(0.0), cfg.v_max);
  const double h0 = cfg.equilibrium_headway(v0);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = static_cast<double>(n - 1 - k) * h0;
    v[k] = v0;
  }

  PlatoonHistory hist;
  hist.positions.assign(n, std::vector<double>(steps));
  hist.velocities.assign(n, std::vector<double>(steps));
  std::vector<double> accel(n);
  const double noise_scale = cfg.lead_accel_noise * std::sqrt(dt);

  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < n; ++k) {
      hist.positions[k][s] = x[k];
      hist.velocities[k][s] = v[k];
    }
    if (s + 1 == steps) break;
    const double t = static_cast<double>(s) * dt;
    accel[0] = cfg.lead_gain.value_or(cfg.alpha) * (cfg.target_speed(t) - v[0]);
    for (std::size_t k = 1; k < n; ++k) {
      const double gap = x[k - 1] - x[k];
      if (!(gap > 0.0)) {
        throw Error(Errc::CollisionDetected,
                    "vehicle " + std::to_string(k) + " reached its predecessor at t = " + std::to_string(t));
      }
      accel[k] = cfg.alpha * (cfg.optimal_velocity(gap) - v[k]);
    }
    const double kick = cfg.lead_accel_noise > 0.0 ? noise_scale * unit(rng) : 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] += dt * v[k];
      v[k] = std::max(0.0, v[k] + dt * accel[k] + (k == 0 ? kick : 0.0));
    }
  }
  return hist;
}

/// Simulate the platoon and pair the head vehicle with the follower whose
/// time-averaged gap is closest to each requested target.
inline std::vector<VehiclePair> synth_generate(const SynthConfig& cfg) {
  const auto hist = simulate_platoon(cfg);
  const auto n = hist.positions.size();
  const auto steps = hist.positions.front().size();

  std::vector<double> mean_gap(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    double sum = 0.0;
    for (std::size_t s = 0; s < steps; ++s) sum += hist.positions[0][s] - hist.positions[k][s];
    mean_gap[k] = sum / static_cast<double>(steps);
  }

  std::vector<VehiclePair> pairs;
  for (double target : cfg.pair_gap_target) {
    std::size_t best = 1;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < n; ++k) {
      const double err = std::abs(mean_gap[k] - target);
      if (err < best_err) {
        best_err = err;
        best = k;
      }
    }
    pairs.emplace_back(Trajectory(0.0, hist.positions[0], hist.velocities[0]),
                       Trajectory(0.0, hist.positions[best], hist.velocities[best]));
  }
  return pairs;
}

/// Measurement noise on both vehicles of every pair, with an independent stream
/// per trajectory derived from the config seed.
inline std::vector<VehiclePair> add_measurement_noise(const std::vector<VehiclePair>& pairs, const SynthConfig& cfg) {
  std::vector<VehiclePair> out;
  std::uint64_t stream = 0;
  for (const auto& p : pairs) {
    const std::uint64_t base = cfg.seed * 0x9e3779b97f4a7c15ull + 2 * (++stream);
    out.emplace_back(add_noise(p.lead(), cfg.noise_pos, cfg.noise_vel, base),
                     add_noise(p.ego(), cfg.noise_pos, cfg.noise_vel, base + 1));
  }
  return out;
}

}  // namespace wavecast
