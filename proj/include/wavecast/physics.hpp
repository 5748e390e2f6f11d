#pragma once

// Newell's car-following relation X_E(t) = X_L(t - T) - w T and the two
// first-principle baselines built on it.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "wavecast/config.hpp"
#include "wavecast/error.hpp"
#include "wavecast/trajectory.hpp"

namespace wavecast {

struct NewellParams {
  double wave_speed = 5.0;  // m/s, backward congestion-wave speed

  static NewellParams from_config(const Config& cfg) {
    NewellParams p;
    p.wave_speed = cfg.get_double("newell.wave_speed_mps", p.wave_speed);
    if (!(p.wave_speed > 0.0)) throw Error(Errc::ConfigInvalid, "newell.wave_speed_mps: must be > 0");
    return p;
  }
};

struct TimeShift {
  double seconds = 0.0;
  /// Shift in (fractional) sample steps, seconds / dt.
  double steps = 0.0;
  /// floor(seconds / dt): the longest horizon Newell's translation can serve.
  std::size_t sigma_steps = 0;
};

inline constexpr double kShiftTolerance = 1e-6;  // m
inline constexpr int kBisectionCap = 200;

namespace detail {

inline void check_index(const VehiclePair& pair, std::size_t i) {
  if (i >= pair.size()) {
    throw Error(Errc::IndexOutOfRange,
                "index " + std::to_string(i) + " outside series of length " + std::to_string(pair.size()));
  }
}

}  // namespace detail

/// Residual of the shift relation at shift `s` (in steps) for prediction index i.
inline double newell_mismatch(const VehiclePair& pair, std::size_t i, double s, const NewellParams& params) {
  const double lead_x = Trajectory::interpolate(pair.lead().positions(), static_cast<double>(i) - s);
  return lead_x - params.wave_speed * steps_to_seconds(s) - pair.ego().positions()[i];
}

/// Solve for T > 0 with X_L(t_i - T) - w T - X_E(t_i) = 0.
///
/// The grid is scanned backward from t_i for the first sign change (shortest
/// shift wins when noise makes the lead history non-monotone), then the
/// bracketing cell is bisected until |f| < 1e-6 m.
inline TimeShift solve_time_shift(const VehiclePair& pair, std::size_t i, const NewellParams& params) {
  detail::check_index(pair, i);
  auto f = [&](double s) { return newell_mismatch(pair, i, s, params); };

  double f_prev = f(0.0);
  if (!(f_prev > kShiftTolerance)) {
    throw Error(Errc::NoRoot, "lead not ahead of ego at index " + std::to_string(i));
  }
  for (std::size_t m = 1; m <= i; ++m) {
    const double fm = f(static_cast<double>(m));
    if (std::abs(fm) < kShiftTolerance) {
      const double s = static_cast<double>(m);
      return TimeShift{steps_to_seconds(s), s, m};
    }
    if (fm < 0.0) {
      double lo = static_cast<double>(m - 1);
      double hi = static_cast<double>(m);
      for (int it = 0; it < kBisectionCap; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fmid = f(mid);
        if (std::abs(fmid) < kShiftTolerance) {
          return TimeShift{steps_to_seconds(mid), mid, m - 1};
        }
        if (fmid > 0.0) lo = mid;
        else hi = mid;
      }
      throw Error(Errc::NoRoot, "bisection did not converge at index " + std::to_string(i));
    }
    f_prev = fm;
  }
  throw Error(Errc::ShiftOutOfRange, "no sign change within lead history at index " + std::to_string(i) +
                                         " (residual " + std::to_string(f_prev) + " m at earliest sample)");
}

/// Lead velocity translated by the shift: v_L(t_i + j dt - T) for j in [j_first, j_last].
inline std::vector<double> translate_lead_velocity(const VehiclePair& pair, std::size_t i, const TimeShift& shift,
                                                   long j_first, long j_last) {
  std::vector<double> out;
  if (j_last < j_first) return out;
  const double u_first = static_cast<double>(i) + static_cast<double>(j_first) - shift.steps;
  const double u_last = static_cast<double>(i) + static_cast<double>(j_last) - shift.steps;
  if (u_first < 0.0) {
    throw Error(Errc::InsufficientHistory, "lead history starts after t_i + " + std::to_string(j_first) +
                                               " dt - T at index " + std::to_string(i));
  }
  if (u_last > static_cast<double>(pair.size() - 1)) {
    throw Error(Errc::IndexOutOfRange, "translated time beyond recorded lead data");
  }
  out.reserve(static_cast<std::size_t>(j_last - j_first + 1));
  for (long j = j_first; j <= j_last; ++j) {
    const double u = static_cast<double>(i) + static_cast<double>(j) - shift.steps;
    out.push_back(Trajectory::interpolate(pair.lead().velocities(), u));
  }
  return out;
}

/// Newell's preview of the ego velocity for horizons 1..l.
inline std::vector<double> newell_predict(const VehiclePair& pair, std::size_t i, std::size_t l,
                                          const NewellParams& params) {
  const auto shift = solve_time_shift(pair, i, params);
  if (l > shift.sigma_steps) {
    throw Error(Errc::HorizonExceedsShift, "horizon " + std::to_string(l) + " exceeds shift of " +
                                               std::to_string(shift.sigma_steps) + " steps");
  }
  return translate_lead_velocity(pair, i, shift, 1, static_cast<long>(l));
}

/// Constant-speed baseline: l copies of v_E(t_i).
inline std::vector<double> constant_predict(const VehiclePair& pair, std::size_t i, std::size_t l) {
  detail::check_index(pair, i);
  return std::vector<double>(l, pair.ego().velocities()[i]);
}

/// R(i, j) = v_E(i + j) - v_L(t_i + j dt - T) for j = -k+1..0, with T solved once at i.
inline std::vector<double> residual_history(const VehiclePair& pair, std::size_t i, std::size_t k,
                                            const TimeShift& shift) {
  detail::check_index(pair, i);
  if (k == 0) return {};
  if (k > i + 1) {
    throw Error(Errc::InsufficientHistory, "need " + std::to_string(k) + " ego samples before index " +
                                               std::to_string(i));
  }
  auto out = translate_lead_velocity(pair, i, shift, -static_cast<long>(k) + 1, 0);
  const auto& ve = pair.ego().velocities();
  for (std::size_t n = 0; n < k; ++n) out[n] = ve[i + 1 - k + n] - out[n];
  return out;
}

inline std::vector<double> residual_history(const VehiclePair& pair, std::size_t i, std::size_t k,
                                            const NewellParams& params) {
  return residual_history(pair, i, k, solve_time_shift(pair, i, params));
}

}  // namespace wavecast
