#pragma once

// Velocity error at a horizon (VE), its running average over horizons (AVE),
// and the multi-seed comparison report.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "wavecast/error.hpp"
#include "wavecast/trajectory.hpp"

namespace wavecast {

/// One forecast per sample, each indexed by horizon step j = 1..l at position j-1.
using Forecasts = std::vector<std::vector<double>>;

namespace detail {

inline void check_forecasts(const Forecasts& preds, const Forecasts& truths, std::size_t j) {
  if (preds.empty()) throw Error(Errc::EmptySet, "no samples");
  if (preds.size() != truths.size()) throw Error(Errc::LengthMismatch, "prediction and truth counts differ");
  if (j < 1) throw Error(Errc::HorizonTooLarge, "horizons start at 1");
  for (std::size_t n = 0; n < preds.size(); ++n) {
    if (preds[n].size() < j || truths[n].size() < j) {
      throw Error(Errc::HorizonTooLarge, "horizon " + std::to_string(j) + " beyond sample " + std::to_string(n));
    }
  }
}

}  // namespace detail

/// VE(j) = mean over samples of |v^_E(i, j) - v_E(i + j)|.
inline double ve(const Forecasts& preds, const Forecasts& truths, std::size_t j) {
  detail::check_forecasts(preds, truths, j);
  double acc = 0.0;
  for (std::size_t n = 0; n < preds.size(); ++n) acc += std::abs(preds[n][j - 1] - truths[n][j - 1]);
  return acc / static_cast<double>(preds.size());
}

/// VE(1..l) in one pass over the data.
inline std::vector<double> ve_curve(const Forecasts& preds, const Forecasts& truths, std::size_t l) {
  detail::check_forecasts(preds, truths, l);
  std::vector<double> curve(l, 0.0);
  for (std::size_t n = 0; n < preds.size(); ++n) {
    for (std::size_t j = 0; j < l; ++j) curve[j] += std::abs(preds[n][j] - truths[n][j]);
  }
  for (auto& c : curve) c /= static_cast<double>(preds.size());
  return curve;
}

/// AVE(j) = mean of VE(1..j).
inline double ave(const Forecasts& preds, const Forecasts& truths, std::size_t j) {
  const auto curve = ve_curve(preds, truths, j);
  double acc = 0.0;
  for (double c : curve) acc += c;
  return acc / static_cast<double>(j);
}

// ---------------------------------------------------------------------------
// Report

/// Predictions of one method (one seed) with the identity of each sample.
struct PredictionSet {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> keys;  // (pair_id, t_index)
  Forecasts predictions;
  Forecasts truths;
};

struct MethodRuns {
  std::string name;
  std::vector<PredictionSet> seeds;
};

struct CellStat {
  double mean = 0.0;
  double std = 0.0;
};

struct MethodReport {
  std::string name;
  std::size_t seed_count = 0;
  std::vector<CellStat> ve_at;       // one per report horizon
  CellStat ave;                      // AVE at the last report horizon
  std::vector<CellStat> curve;       // VE(1..l)
};

struct ErrorReport {
  std::vector<std::size_t> horizons;  // steps
  std::size_t sample_count = 0;
  std::vector<MethodReport> methods;
};

namespace detail {

/// Mean and population standard deviation.
inline CellStat mean_std(const std::vector<double>& xs) {
  CellStat c;
  for (double x : xs) c.mean += x;
  c.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - c.mean) * (x - c.mean);
  c.std = std::sqrt(ss / static_cast<double>(xs.size()));
  return c;
}

}  // namespace detail

inline constexpr std::size_t kReportHorizons[4] = {100, 200, 300, 400};

/// Mean +- std across seeds at each horizon (steps). AVE is taken at the last
/// horizon. Every method and seed must cover the identical sample set.
inline ErrorReport report(const std::vector<MethodRuns>& methods,
                          std::vector<std::size_t> horizons = {kReportHorizons, kReportHorizons + 4}) {
  if (methods.empty() || methods.front().seeds.empty()) throw Error(Errc::EmptySet, "nothing to report");
  if (horizons.empty()) throw Error(Errc::HorizonTooLarge, "no report horizons");
  const auto& reference = methods.front().seeds.front().keys;
  ErrorReport rep;
  rep.horizons = horizons;
  rep.sample_count = reference.size();
  const std::size_t l = horizons.back();
  for (const auto& m : methods) {
    if (m.seeds.empty()) throw Error(Errc::EmptySet, m.name + " has no runs");
    std::vector<std::vector<double>> curves;
    for (const auto& run : m.seeds) {
      if (run.keys != reference) {
        throw Error(Errc::InconsistentSampleSets, m.name + " was evaluated on a different sample set");
      }
      std::size_t full = run.predictions.empty() ? 0 : run.predictions.front().size();
      for (const auto& p : run.predictions) full = std::min(full, p.size());
      curves.push_back(ve_curve(run.predictions, run.truths, std::max(full, l)));
    }
    MethodReport mr;
    mr.name = m.name;
    mr.seed_count = m.seeds.size();
    const std::size_t len = curves.front().size();
    for (std::size_t j = 0; j < len; ++j) {
      std::vector<double> at;
      for (const auto& c : curves) at.push_back(c[j]);
      mr.curve.push_back(detail::mean_std(at));
    }
    for (auto h : horizons) {
      std::vector<double> at;
      for (const auto& c : curves) at.push_back(c[h - 1]);
      mr.ve_at.push_back(detail::mean_std(at));
    }
    std::vector<double> aves;
    for (const auto& c : curves) {
      double acc = 0.0;
      for (std::size_t j = 0; j < l; ++j) acc += c[j];
      aves.push_back(acc / static_cast<double>(l));
    }
    mr.ave = detail::mean_std(aves);
    rep.methods.push_back(std::move(mr));
  }
  return rep;
}

namespace detail {

inline std::string horizon_label(const char* prefix, std::size_t steps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s@%gs", prefix, steps_to_seconds(static_cast<double>(steps)));
  return buf;
}

inline std::string num17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Aligned plain-text table; single-seed rows omit the +- part.
inline std::string render_table(const ErrorReport& rep) {
  std::vector<std::string> header{"Method"};
  for (auto h : rep.horizons) header.push_back(detail::horizon_label("VE", h));
  header.push_back(detail::horizon_label("AVE", rep.horizons.back()));

  std::vector<std::vector<std::string>> rows;
  auto cell = [](const CellStat& c, bool with_std) {
    char buf[48];
    if (with_std) std::snprintf(buf, sizeof buf, "%.2f +- %.2f", c.mean, c.std);
    else std::snprintf(buf, sizeof buf, "%.2f", c.mean);
    return std::string(buf);
  };
  for (const auto& m : rep.methods) {
    const bool with_std = m.seed_count > 1;
    std::vector<std::string> row{m.name};
    for (const auto& c : m.ve_at) row.push_back(cell(c, with_std));
    row.push_back(cell(m.ave, with_std));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t c = 0; c < r.size(); ++c) {
      std::string padded = r[c];
      padded.resize(width[c], ' ');
      s += (c ? " | " : "") + padded;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 3 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  char foot[96];
  std::snprintf(foot, sizeof foot, "(m/s, %zu samples; mean +- std over seeds)\n", rep.sample_count);
  return out + foot;
}

/// method,seeds,<VE@..s_mean,VE@..s_std>...,AVE@..s_mean,AVE@..s_std
inline void write_report_csv(const ErrorReport& rep, std::ostream& out) {
  out << "method,seeds";
  for (auto h : rep.horizons) {
    const auto label = detail::horizon_label("VE", h);
    out << ',' << label << "_mean," << label << "_std";
  }
  const auto ave_label = detail::horizon_label("AVE", rep.horizons.back());
  out << ',' << ave_label << "_mean," << ave_label << "_std\n";
  for (const auto& m : rep.methods) {
    out << m.name << ',' << m.seed_count;
    for (const auto& c : m.ve_at) out << ',' << detail::num17(c.mean) << ',' << detail::num17(c.std);
    out << ',' << detail::num17(m.ave.mean) << ',' << detail::num17(m.ave.std) << '\n';
  }
}

inline nlohmann::ordered_json report_json(const ErrorReport& rep) {
  nlohmann::ordered_json j;
  j["sample_count"] = rep.sample_count;
  j["horizons_s"] = nlohmann::ordered_json::array();
  for (auto h : rep.horizons) j["horizons_s"].push_back(steps_to_seconds(static_cast<double>(h)));
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : rep.methods) {
    nlohmann::ordered_json row;
    row["method"] = m.name;
    row["seeds"] = m.seed_count;
    row["ve"] = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h < rep.horizons.size(); ++h) {
      row["ve"].push_back({{"horizon_s", steps_to_seconds(static_cast<double>(rep.horizons[h]))},
                           {"mean", m.ve_at[h].mean},
                           {"std", m.ve_at[h].std}});
    }
    row["ave"] = {{"horizon_s", steps_to_seconds(static_cast<double>(rep.horizons.back()))},
                  {"mean", m.ave.mean},
                  {"std", m.ave.std}};
    j["methods"].push_back(std::move(row));
  }
  return j;
}

/// horizon_s,method,ve_mean,ve_std for every horizon step.
inline void write_ve_curve_csv(const ErrorReport& rep, std::ostream& out) {
  out << "horizon_s,method,ve_mean,ve_std\n";
  char buf[48];
  for (const auto& m : rep.methods) {
    for (std::size_t j = 0; j < m.curve.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.1f", steps_to_seconds(static_cast<double>(j + 1)));
      out << buf << ',' << m.name << ',' << detail::num17(m.curve[j].mean) << ','
          << detail::num17(m.curve[j].std) << '\n';
    }
  }
}

}  // namespace wavecast
