#pragma once

// Rolling-window samples with attached Newell features, time-interval splits,
// and train-set normalization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "wavecast/binary_io.hpp"
#include "wavecast/config.hpp"
#include "wavecast/error.hpp"
#include "wavecast/physics.hpp"
#include "wavecast/trajectory.hpp"

namespace wavecast {

struct WindowSpec {
  std::size_t k = 600;        // ego history steps
  std::size_t l = 400;        // prediction horizon steps
  std::size_t k_under = 300;  // Newell preview steps before t_i fed to the residual model
  std::size_t stride = 1;

  void validate() const {
    if (k < 1) throw Error(Errc::ConfigInvalid, "window.k: must be >= 1");
    if (l < 1) throw Error(Errc::ConfigInvalid, "window.l: must be >= 1");
    if (k_under < 1) throw Error(Errc::ConfigInvalid, "window.k_under: must be >= 1");
    if (stride < 1) throw Error(Errc::ConfigInvalid, "window.stride: must be >= 1");
  }

  static WindowSpec from_config(const Config& cfg) {
    WindowSpec w;
    auto get = [&](const char* key, std::size_t fallback) {
      const auto v = cfg.get_int(key, static_cast<long long>(fallback));
      if (v < 1) throw Error(Errc::ConfigInvalid, std::string(key) + ": must be >= 1");
      return static_cast<std::size_t>(v);
    };
    w.k = get("window.k", w.k);
    w.l = get("window.l", w.l);
    w.k_under = get("window.k_under", w.k_under);
    w.stride = get("window.stride", w.stride);
    return w;
  }
};

/// One rolling window anchored at prediction index i.
struct Sample {
  std::uint64_t pair_id = 0;
  std::uint64_t t_index = 0;
  double t_start = 0.0;  // time of v_E(i-k+1)
  double t_end = 0.0;    // time of v_E(i+l)
  double shift_s = 0.0;  // Newell shift T solved at i
  std::vector<double> ego_history;       // v_E(i-k+1..i)
  std::vector<double> newell_future;     // ~v_E(i, 1..l)
  std::vector<double> newell_extended;   // ~v_E(i, -k_under+1..l)
  std::vector<double> residual_history;  // R(i, -k+1..0)
  std::vector<double> target;            // v_E(i+1..i+l)

  /// R(i, 1..l) against the ground truth; the residual model's training target.
  std::vector<double> target_residual() const {
    std::vector<double> r(target.size());
    for (std::size_t j = 0; j < r.size(); ++j) r[j] = target[j] - newell_future[j];
    return r;
  }

  friend bool operator==(const Sample&, const Sample&) = default;
};

struct WindowSet {
  std::vector<Sample> samples;
  std::size_t skipped_sigma = 0;    // shift shorter than the horizon
  std::size_t skipped_history = 0;  // shift or lead history unavailable
};

/// Half-open range of sample indices [first, last) the ego windows must lie in.
/// Lead history before `first` is still used for the Newell features.
struct IndexRange {
  std::size_t first = 0;
  std::size_t last = std::numeric_limits<std::size_t>::max();
};

/// The sample anchored at prediction index i.
///
/// Errors: HorizonExceedsShift when the future or the Newell shift is shorter
/// than l; InsufficientHistory when fewer than k ego samples or too little lead
/// history precede i; ShiftOutOfRange / NoRoot from the shift solver.
inline Sample make_sample(const VehiclePair& pair, std::size_t i, const WindowSpec& spec, const NewellParams& params,
                          std::uint64_t pair_id = 0) {
  spec.validate();
  if (i >= pair.size()) {
    throw Error(Errc::IndexOutOfRange, "index " + std::to_string(i) + " outside series of length " +
                                           std::to_string(pair.size()));
  }
  if (i + spec.l >= pair.size()) {
    throw Error(Errc::HorizonExceedsShift, "horizon of " + std::to_string(spec.l) + " steps runs past the end of the data");
  }
  if (i + 1 < spec.k) {
    throw Error(Errc::InsufficientHistory, "need " + std::to_string(spec.k) + " ego samples up to index " +
                                               std::to_string(i));
  }
  const auto shift = solve_time_shift(pair, i, params);
  if (shift.sigma_steps < spec.l) {
    throw Error(Errc::HorizonExceedsShift, "horizon " + std::to_string(spec.l) + " exceeds shift of " +
                                               std::to_string(shift.sigma_steps) + " steps");
  }
  const auto lookback = static_cast<double>(std::max(spec.k, spec.k_under));
  if (static_cast<double>(i) - (lookback - 1.0) - shift.steps < 0.0) {
    throw Error(Errc::InsufficientHistory, "lead history too short for index " + std::to_string(i));
  }
  const auto& ve = pair.ego().velocities();
  Sample s;
  s.pair_id = pair_id;
  s.t_index = i;
  s.t_start = pair.time(i + 1 - spec.k);
  s.t_end = pair.time(i + spec.l);
  s.shift_s = shift.seconds;
  s.ego_history.assign(ve.begin() + static_cast<long>(i + 1 - spec.k), ve.begin() + static_cast<long>(i + 1));
  s.newell_extended =
      translate_lead_velocity(pair, i, shift, -static_cast<long>(spec.k_under) + 1, static_cast<long>(spec.l));
  s.newell_future.assign(s.newell_extended.end() - static_cast<long>(spec.l), s.newell_extended.end());
  s.residual_history = residual_history(pair, i, spec.k, shift);
  s.target.assign(ve.begin() + static_cast<long>(i + 1), ve.begin() + static_cast<long>(i + 1 + spec.l));
  return s;
}

/// Every qualifying window whose ego span lies in `range`, anchored every
/// `stride` steps. Indices whose shift is shorter than l, or that lack lead
/// history, are counted and skipped.
inline WindowSet build_windows(const VehiclePair& pair, const WindowSpec& spec, const NewellParams& params,
                               std::uint64_t pair_id = 0, IndexRange range = {}) {
  spec.validate();
  const std::size_t last = std::min(range.last, pair.size());
  WindowSet out;
  if (range.first >= last || last - range.first < spec.k + spec.l) {
    throw Error(Errc::SeriesTooShort, "series of " + std::to_string(last > range.first ? last - range.first : 0) +
                                          " steps is shorter than k + l = " + std::to_string(spec.k + spec.l));
  }
  for (std::size_t i = range.first + spec.k - 1; i + spec.l < last; i += spec.stride) {
    try {
      out.samples.push_back(make_sample(pair, i, spec, params, pair_id));
    } catch (const Error& e) {
      switch (e.code()) {
        case Errc::HorizonExceedsShift: ++out.skipped_sigma; break;
        case Errc::ShiftOutOfRange:
        case Errc::NoRoot:
        case Errc::InsufficientHistory: ++out.skipped_history; break;
        default: throw;
      }
    }
  }
  if (out.samples.empty()) {
    throw Error(Errc::SeriesTooShort, "no index qualifies (" + std::to_string(out.skipped_sigma) +
                                          " below horizon, " + std::to_string(out.skipped_history) +
                                          " without lead history)");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct TimeInterval {
  double begin = 0.0;
  double end = 0.0;  // exclusive
};

/// Train/validation/test intervals in seconds. A sample belongs to a split when
/// its span lies inside one of the split's intervals and stays at least
/// `buffer` seconds away from every interval of the other splits.
struct SplitSpec {
  std::vector<TimeInterval> train;
  std::vector<TimeInterval> val;
  std::vector<TimeInterval> test;
  double buffer = 50.0;

  void validate() const {
    if (buffer < 0.0) throw Error(Errc::ConfigInvalid, "split.buffer: must be >= 0");
    const std::vector<TimeInterval>* groups[3] = {&train, &val, &test};
    const char* names[3] = {"split.train", "split.val", "split.test"};
    for (int g = 0; g < 3; ++g) {
      if (groups[g]->empty()) throw Error(Errc::ConfigInvalid, std::string(names[g]) + ": no intervals");
      for (const auto& iv : *groups[g]) {
        if (!(iv.end > iv.begin)) throw Error(Errc::ConfigInvalid, std::string(names[g]) + ": empty interval");
      }
    }
    for (int a = 0; a < 3; ++a) {
      for (int b = a; b < 3; ++b) {
        for (std::size_t p = 0; p < groups[a]->size(); ++p) {
          for (std::size_t q = (a == b ? p + 1 : 0); q < groups[b]->size(); ++q) {
            const auto& x = (*groups[a])[p];
            const auto& y = (*groups[b])[q];
            if (x.begin < y.end && y.begin < x.end) {
              throw Error(Errc::ConfigInvalid,
                          std::string(names[a]) + " overlaps " + names[b]);
            }
          }
        }
      }
    }
  }

  static SplitSpec from_config(const Config& cfg) {
    auto intervals = [&](const char* key) {
      std::vector<TimeInterval> out;
      for (auto [a, b] : cfg.get_pairs(key, {})) out.push_back({a, b});
      return out;
    };
    SplitSpec s;
    s.train = intervals("split.train");
    s.val = intervals("split.val");
    s.test = intervals("split.test");
    s.buffer = cfg.get_double("split.buffer", s.buffer);
    s.validate();
    return s;
  }
};

struct Splits {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

namespace detail {

inline constexpr double kTimeSlack = 1e-6;

inline bool span_inside(const Sample& s, const TimeInterval& iv) {
  return s.t_start >= iv.begin - kTimeSlack && s.t_end < iv.end - kTimeSlack;
}

inline bool span_clear_of(const Sample& s, const TimeInterval& iv, double buffer) {
  return s.t_end < iv.begin - buffer - kTimeSlack || s.t_start >= iv.end + buffer - kTimeSlack;
}

}  // namespace detail

inline Splits split(const std::vector<Sample>& samples, const SplitSpec& spec) {
  spec.validate();
  Splits out;
  const std::vector<TimeInterval>* groups[3] = {&spec.train, &spec.val, &spec.test};
  std::vector<Sample>* dest[3] = {&out.train, &out.val, &out.test};
  for (const auto& s : samples) {
    for (int g = 0; g < 3; ++g) {
      const bool inside = std::any_of(groups[g]->begin(), groups[g]->end(),
                                      [&](const TimeInterval& iv) { return detail::span_inside(s, iv); });
      if (!inside) continue;
      bool clear = true;
      for (int o = 0; o < 3 && clear; ++o) {
        if (o == g) continue;
        for (const auto& iv : *groups[o]) {
          if (!detail::span_clear_of(s, iv, spec.buffer)) {
            clear = false;
            break;
          }
        }
      }
      if (clear) dest[g]->push_back(s);
      break;
    }
  }
  const char* names[3] = {"train", "val", "test"};
  for (int g = 0; g < 3; ++g) {
    if (dest[g]->empty()) throw Error(Errc::EmptySplit, std::string(names[g]) + " split received no samples");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  double apply(double x) const { return (x - mean) / std; }
  double invert(double z) const { return z * std + mean; }
  /// Residuals share the velocity scale but stay centred on zero.
  double apply_residual(double r) const { return r / std; }
  double invert_residual(double z) const { return z * std; }
};

/// Population mean and std over every ego-history value of the training samples.
inline NormStats fit_norm(const std::vector<Sample>& train) {
  if (train.empty()) throw Error(Errc::EmptySplit, "cannot fit normalization on an empty train set");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : train) {
    for (double v : s.ego_history) sum += v;
    n += s.ego_history.size();
  }
  if (n == 0) throw Error(Errc::DegenerateData, "no ego history values");
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& s : train) {
    for (double v : s.ego_history) ss += (v - mean) * (v - mean);
  }
  const double std = std::sqrt(ss / static_cast<double>(n));
  if (std < 1e-9) throw Error(Errc::DegenerateData, "train velocities are constant");
  return {mean, std};
}

inline std::vector<double> apply_norm(const std::vector<double>& x, const NormStats& stats) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stats.apply(x[i]);
  return out;
}

inline std::vector<double> denorm(const std::vector<double>& z, const NormStats& stats) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = stats.invert(z[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Binary sample records: "WCSM", u32 version, u64 count, then per sample
// u64 pair_id, u64 t_index, f64 t_start, f64 t_end, f64 shift_s and five
// length-prefixed f64 arrays. All little-endian.

inline constexpr char kSampleMagic[4] = {'W', 'C', 'S', 'M'};
inline constexpr std::uint32_t kSampleVersion = 1;

inline void write_samples(std::ostream& out, const std::vector<Sample>& samples) {
  out.write(kSampleMagic, 4);
  binio::write_u32(out, kSampleVersion);
  binio::write_u64(out, samples.size());
  for (const auto& s : samples) {
    binio::write_u64(out, s.pair_id);
    binio::write_u64(out, s.t_index);
    binio::write_f64(out, s.t_start);
    binio::write_f64(out, s.t_end);
    binio::write_f64(out, s.shift_s);
    binio::write_f64s(out, s.ego_history);
    binio::write_f64s(out, s.newell_future);
    binio::write_f64s(out, s.newell_extended);
    binio::write_f64s(out, s.residual_history);
    binio::write_f64s(out, s.target);
  }
  if (!out) throw Error(Errc::Io, "failed writing sample records");
}

inline std::vector<Sample> read_samples(std::istream& in) {
  char magic[4];
  binio::read_exact(in, magic, 4);
  if (!std::equal(magic, magic + 4, kSampleMagic)) throw Error(Errc::FormatError, "not a sample record file");
  if (binio::read_u32(in) != kSampleVersion) throw Error(Errc::FormatError, "unsupported sample file version");
  const auto n = binio::read_u64(in);
  std::vector<Sample> samples;
  for (std::uint64_t c = 0; c < n; ++c) {
    Sample s;
    s.pair_id = binio::read_u64(in);
    s.t_index = binio::read_u64(in);
    s.t_start = binio::read_f64(in);
    s.t_end = binio::read_f64(in);
    s.shift_s = binio::read_f64(in);
    s.ego_history = binio::read_f64s(in);
    s.newell_future = binio::read_f64s(in);
    s.newell_extended = binio::read_f64s(in);
    s.residual_history = binio::read_f64s(in);
    s.target = binio::read_f64s(in);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace wavecast
