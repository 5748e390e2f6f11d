#pragma once

// Shared constructions for the unit and acceptance tests.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "wavecast/dataset.hpp"
#include "wavecast/trajectory.hpp"

namespace fixtures {

using wavecast::kSamplePeriod;
using wavecast::Trajectory;
using wavecast::VehiclePair;

/// Both vehicles at constant speed v, lead `gap` metres ahead.
inline VehiclePair constant_pair(double v, double gap, std::size_t n) {
  std::vector<double> xl(n), xe(n), vv(n, v);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * kSamplePeriod;
    xe[i] = v * t;
    xl[i] = gap + v * t;
  }
  return VehiclePair(Trajectory(0.0, xl, vv), Trajectory(0.0, xe, vv));
}

/// Smooth, strictly positive lead speed profile with a congestion dip.
inline double lead_speed(double t) {
  return 15.0 + 8.0 * std::sin(2.0 * M_PI * t / 170.0) + 3.0 * std::cos(2.0 * M_PI * t / 47.0);
}

/// A pair obeying the shift relation exactly with a shift of `shift_steps`
/// samples: the ego replays the lead `shift_steps` samples later, offset by
/// w * T. The lead is simulated from `shift_steps` samples before t = 0, so
/// indices i >= shift_steps have full lead history.
inline VehiclePair model_exact_pair(std::size_t n, std::size_t shift_steps, double w) {
  const std::size_t total = n + shift_steps;
  std::vector<double> x(total), v(total);
  x[0] = 2000.0;
  for (std::size_t i = 0; i < total; ++i) {
    v[i] = lead_speed(static_cast<double>(i) * kSamplePeriod);
    if (i > 0) x[i] = x[i - 1] + 0.5 * kSamplePeriod * (v[i] + v[i - 1]);
  }
  const double offset = w * static_cast<double>(shift_steps) * kSamplePeriod;
  std::vector<double> xl(n), vl(n), xe(n), ve(n);
  for (std::size_t i = 0; i < n; ++i) {
    xl[i] = x[i + shift_steps];
    vl[i] = v[i + shift_steps];
    xe[i] = x[i] - offset;
    ve[i] = v[i];
  }
  return VehiclePair(Trajectory(0.0, xl, vl), Trajectory(0.0, xe, ve));
}

/// Windows over a noisy model-exact pair: k = 12, l = 8, k_under = 6.
inline std::vector<wavecast::Sample> small_samples(std::size_t count, std::uint64_t seed = 1) {
  const std::size_t shift = 9;
  auto clean = model_exact_pair(count + 30, shift, 5.0);
  VehiclePair pair(wavecast::add_noise(clean.lead(), 0.0, 0.3, seed),
                   wavecast::add_noise(clean.ego(), 0.0, 0.3, seed + 1000));
  wavecast::WindowSpec spec;
  spec.k = 12;
  spec.l = 8;
  spec.k_under = 6;
  auto set = wavecast::build_windows(pair, spec, wavecast::NewellParams{}, 0, {shift, pair.size()});
  set.samples.resize(std::min(count, set.samples.size()));
  return set.samples;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("wavecast_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
