#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/config.hpp"
#include "wavecast/error.hpp"

namespace wavecast {

/// Fixed sampling period of every trajectory, in seconds.
inline constexpr double kSamplePeriod = 0.1;
inline constexpr double kSampleRate = 10.0;

/// Step count to seconds. Dividing by the rate rounds correctly, so whole
/// tenths come out as the nearest double (274 steps -> 27.4, not 27.400000000000002).
constexpr double steps_to_seconds(double steps) { return steps / kSampleRate; }

/// Uniformly sampled position/velocity series of one vehicle.
///
/// Positions are arc length along the road (m), velocities m/s. Positions are
/// not required to be monotone: measurement noise may break monotonicity and
/// consumers tolerate that.
class Trajectory {
 public:
  Trajectory(double t0, std::vector<double> positions, std::vector<double> velocities)
      : t0_(t0), positions_(std::move(positions)), velocities_(std::move(velocities)) {
    if (positions_.size() != velocities_.size()) {
      throw Error(Errc::LengthMismatch, "positions and velocities differ in length");
    }
    if (positions_.size() < 2) {
      throw Error(Errc::MalformedRow, "trajectory needs at least 2 samples");
    }
    for (std::size_t i = 0; i < velocities_.size(); ++i) {
      if (!std::isfinite(positions_[i]) || !std::isfinite(velocities_[i])) {
        throw Error(Errc::MalformedRow, "non-finite sample at index " + std::to_string(i));
      }
      if (velocities_[i] < 0.0) {
        throw Error(Errc::MalformedRow, "negative velocity at index " + std::to_string(i));
      }
    }
  }

  double t0() const { return t0_; }
  double dt() const { return kSamplePeriod; }
  std::size_t size() const { return positions_.size(); }
  double time(std::size_t i) const { return t0_ + steps_to_seconds(static_cast<double>(i)); }
  const std::vector<double>& positions() const { return positions_; }
  const std::vector<double>& velocities() const { return velocities_; }

  /// Linear interpolation at a fractional sample index; `u` must lie in [0, size-1].
  static double interpolate(const std::vector<double>& series, double u) {
    const auto last = static_cast<double>(series.size() - 1);
    if (u <= 0.0) return series.front();
    if (u >= last) return series.back();
    const auto lo = static_cast<std::size_t>(std::floor(u));
    const double frac = u - static_cast<double>(lo);
    if (frac == 0.0) return series[lo];
    return series[lo] + frac * (series[lo + 1] - series[lo]);
  }

 private:
  double t0_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
};

/// Aligned lead and ego trajectories; the lead drives ahead of the ego.
class VehiclePair {
 public:
  VehiclePair(Trajectory lead, Trajectory ego) : lead_(std::move(lead)), ego_(std::move(ego)) {
    if (lead_.size() != ego_.size() || lead_.t0() != ego_.t0()) {
      throw Error(Errc::LengthMismatch, "lead and ego are not on the same sampling grid");
    }
    for (std::size_t i = 0; i < lead_.size(); ++i) {
      if (!(lead_.positions()[i] > ego_.positions()[i])) {
        throw Error(Errc::LeadNotAhead, "lead is not ahead of ego at index " + std::to_string(i));
      }
    }
  }

  const Trajectory& lead() const { return lead_; }
  const Trajectory& ego() const { return ego_; }
  std::size_t size() const { return lead_.size(); }
  double time(std::size_t i) const { return lead_.time(i); }

 private:
  Trajectory lead_;
  Trajectory ego_;
};

inline constexpr const char* kCsvHeader = "t,x_lead,v_lead,x_ego,v_ego";

/// Parse the five-column pair CSV. Rows must be spaced by 0.1 s +- 1e-6 s.
inline VehiclePair ingest_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedRow, "empty stream");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  if (detail::trim(line) != kCsvHeader) {
    throw Error(Errc::MalformedRow, "unexpected header '" + std::string(detail::trim(line)) + "'");
  }
  std::vector<double> t, xl, vl, xe, ve;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split(line, ',');
    if (fields.size() != 5) {
      throw Error(Errc::MalformedRow, "row " + std::to_string(row) + ": expected 5 fields");
    }
    double v[5];
    for (int c = 0; c < 5; ++c) {
      if (!detail::parse_double(fields[c], v[c]) || !std::isfinite(v[c])) {
        throw Error(Errc::MalformedRow,
                    "row " + std::to_string(row) + ": non-numeric field '" + std::string(fields[c]) + "'");
      }
    }
    if (!t.empty()) {
      const double spacing = v[0] - t.back();
      if (std::abs(spacing - kSamplePeriod) > 1e-6) {
        throw Error(Errc::IrregularSampling, "row " + std::to_string(row) + ": spacing " + std::to_string(spacing));
      }
    }
    if (!(v[1] > v[3])) {
      throw Error(Errc::LeadNotAhead, "row " + std::to_string(row) + ": x_lead <= x_ego");
    }
    t.push_back(v[0]);
    xl.push_back(v[1]);
    vl.push_back(v[2]);
    xe.push_back(v[3]);
    ve.push_back(v[4]);
  }
  if (t.size() < 2) throw Error(Errc::MalformedRow, "need at least 2 data rows");
  return VehiclePair(Trajectory(t.front(), std::move(xl), std::move(vl)),
                     Trajectory(t.front(), std::move(xe), std::move(ve)));
}

/// Write the pair CSV with 12 significant digits.
inline void export_csv(const VehiclePair& pair, std::ostream& out) {
  out << kCsvHeader << '\n';
  char buf[160];
  const auto& L = pair.lead();
  const auto& E = pair.ego();
  for (std::size_t i = 0; i < pair.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", pair.time(i), L.positions()[i],
                  L.velocities()[i], E.positions()[i], E.velocities()[i]);
    out << buf;
  }
}

/// Additive zero-mean Gaussian measurement noise; velocities are clamped at 0.
inline Trajectory add_noise(const Trajectory& traj, double sigma_pos, double sigma_vel, std::uint64_t seed) {
  if (sigma_pos < 0.0 || sigma_vel < 0.0) throw Error(Errc::ConfigInvalid, "noise sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  auto x = traj.positions();
  auto v = traj.velocities();
  for (std::size_t i = 0; i < x.size(); ++i) {
    // both draws are taken even when a sigma is zero so streams stay aligned
    const double nx = unit(rng);
    const double nv = unit(rng);
    x[i] += sigma_pos * nx;
    v[i] = std::max(0.0, v[i] + sigma_vel * nv);
  }
  return Trajectory(traj.t0(), std::move(x), std::move(v));
}

}  // namespace wavecast
