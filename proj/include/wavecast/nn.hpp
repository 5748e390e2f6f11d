#pragma once

// Layers, parameter storage, Adam, and the parameter file format.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavecast/autodiff.hpp"
#include "wavecast/binary_io.hpp"
#include "wavecast/error.hpp"

namespace wavecast::nn {

using ad::Graph;
using ad::Parameter;
using ad::Shape;
using ad::Tensor;
using ad::Var;

struct AdamMoments {
  Tensor first;
  Tensor second;
};

/// Named parameters plus Adam state and free-form string metadata.
///
/// Entries are kept in a std::map so iteration order (and therefore the file
/// layout and the RNG consumption during initialization) is deterministic.
class ParamSet {
 public:
  Parameter& add(const std::string& name, Tensor value, bool trainable = true) {
    auto [it, inserted] = params_.insert_or_assign(name, Parameter(std::move(value), trainable));
    moments_.erase(name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  Parameter& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(Errc::MissingParamset, "no parameter named " + name);
    return it->second;
  }
  const Parameter& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw Error(Errc::MissingParamset, "no parameter named " + name);
    return it->second;
  }

  std::map<std::string, Parameter>& entries() { return params_; }
  const std::map<std::string, Parameter>& entries() const { return params_; }
  const std::map<std::string, AdamMoments>& moments() const { return moments_; }
  std::map<std::string, AdamMoments>& moments() { return moments_; }

  std::map<std::string, std::string>& meta() { return meta_; }
  const std::map<std::string, std::string>& meta() const { return meta_; }

  bool empty() const { return params_.empty(); }
  std::uint64_t step_count() const { return steps_; }
  void set_step_count(std::uint64_t s) { steps_ = s; }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& [_, p] : params_) n += p.trainable ? p.value.size() : 0;
    return n;
  }

  void zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
  }

  double grad_norm() const {
    double ss = 0.0;
    for (const auto& [_, p] : params_) {
      if (!p.trainable) continue;
      for (double g : p.grad.values) ss += g * g;
    }
    return std::sqrt(ss);
  }

  void scale_grads(double s) {
    for (auto& [_, p] : params_) {
      for (double& g : p.grad.values) g *= s;
    }
  }

  /// Values only; gradients and optimizer state are ignored.
  friend bool operator==(const ParamSet& a, const ParamSet& b) {
    if (a.params_.size() != b.params_.size() || a.meta_ != b.meta_) return false;
    for (const auto& [name, p] : a.params_) {
      auto it = b.params_.find(name);
      if (it == b.params_.end() || it->second.value != p.value || it->second.trainable != p.trainable) return false;
    }
    return true;
  }

 private:
  std::map<std::string, Parameter> params_;
  std::map<std::string, AdamMoments> moments_;
  std::map<std::string, std::string> meta_;
  std::uint64_t steps_ = 0;
};

// ---------------------------------------------------------------------------
// Initialization

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
inline Tensor uniform_fan_in(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = dist(rng);
  return t;
}

inline Tensor normal_scaled(Shape shape, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  auto t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = scale * dist(rng);
  return t;
}

// ---------------------------------------------------------------------------
// Linear layer

/// Registers `<prefix>.W` (out x in) and `<prefix>.b` (out).
inline void init_linear(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out,
                        std::mt19937_64& rng) {
  ps.add(prefix + ".W", uniform_fan_in({out, in}, in, rng));
  ps.add(prefix + ".b", uniform_fan_in({out}, in, rng));
}

/// y = W h + b, no activation.
inline Var linear(Graph& g, Var h, ParamSet& ps, const std::string& prefix) {
  Var W = g.param(ps.at(prefix + ".W"));
  Var b = g.param(ps.at(prefix + ".b"));
  return ad::add(ad::matmul(W, h), b);
}

// ---------------------------------------------------------------------------
// LSTM
//
// Gate rows of W (4H x (in + H)) and b (4H) are ordered input, forget, cell, output.

struct LstmWeights {
  Var W;
  Var b;
  std::size_t hidden = 0;
};

struct LstmState {
  Var h;
  Var c;
};

/// Registers `<prefix>.W`, `<prefix>.b` (forget-gate bias set to +1) and the
/// frozen initial state `<prefix>.h0`, `<prefix>.c0` drawn as 0.1 * N(0, 1).
inline void init_lstm(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t hidden,
                      std::mt19937_64& rng) {
  ps.add(prefix + ".W", uniform_fan_in({4 * hidden, in + hidden}, in + hidden, rng));
  auto& b = ps.add(prefix + ".b", uniform_fan_in({4 * hidden}, in + hidden, rng));
  for (std::size_t r = hidden; r < 2 * hidden; ++r) b.value[r] = 1.0;
  ps.add(prefix + ".h0", normal_scaled({hidden}, 0.1, rng), false);
  ps.add(prefix + ".c0", normal_scaled({hidden}, 0.1, rng), false);
}

inline LstmWeights lstm_weights(Graph& g, ParamSet& ps, const std::string& prefix) {
  auto& W = ps.at(prefix + ".W");
  return {g.param(W), g.param(ps.at(prefix + ".b")), W.value.shape[0] / 4};
}

inline LstmState lstm_initial_state(Graph& g, ParamSet& ps, const std::string& prefix) {
  return {g.param(ps.at(prefix + ".h0")), g.param(ps.at(prefix + ".c0"))};
}

/// One LSTM step:
///   i, f, o = sigmoid(W [x; h] + b), g = tanh(W_g [x; h] + b_g),
///   c = f * c_prev + i * g, h = o * tanh(c).
inline LstmState lstm_cell(Var x, LstmState prev, const LstmWeights& w) {
  const std::size_t H = w.hidden;
  Graph& g = *x.graph;
  if (g.shape(prev.h) != Shape{H} || g.shape(prev.c) != Shape{H}) {
    throw Error(Errc::ShapeMismatch, "lstm_cell: state does not match hidden size " + std::to_string(H));
  }
  if (g.shape(w.W)[1] != g.shape(x)[0] + H) {
    throw Error(Errc::ShapeMismatch, "lstm_cell: input of size " + std::to_string(g.shape(x)[0]) +
                                         " does not match weights " + ad::shape_str(g.shape(w.W)));
  }
  Var z = ad::add(ad::matmul(w.W, ad::concat(x, prev.h)), w.b);
  Var i = ad::sigmoid(ad::slice(z, 0, H));
  Var f = ad::sigmoid(ad::slice(z, H, H));
  Var cand = ad::tanh(ad::slice(z, 2 * H, H));
  Var o = ad::sigmoid(ad::slice(z, 3 * H, H));
  Var c = ad::add(ad::mul(f, prev.c), ad::mul(i, cand));
  Var h = ad::mul(o, ad::tanh(c));
  return {h, c};
}

/// Two-layer LSTM over a scalar sequence (one value per time step). The
/// layer-1 hidden sequence passes through ReLU before feeding layer 2.
/// Returns the final layer-2 hidden state.
inline Var lstm_encode(Graph& g, std::span<const double> sequence, ParamSet& ps, const std::string& prefix = "enc") {
  if (sequence.empty()) throw Error(Errc::EmptySequence, "lstm_encode needs at least one time step");
  const auto w1 = lstm_weights(g, ps, prefix + ".l1");
  const auto w2 = lstm_weights(g, ps, prefix + ".l2");
  auto s1 = lstm_initial_state(g, ps, prefix + ".l1");
  auto s2 = lstm_initial_state(g, ps, prefix + ".l2");
  for (double x : sequence) {
    s1 = lstm_cell(g.constant(Tensor({1}, {x})), s1, w1);
    s2 = lstm_cell(ad::relu(s1.h), s2, w2);
  }
  return s2.h;
}

/// Registers a two-layer encoder taking scalar inputs.
inline void init_lstm_encoder(ParamSet& ps, std::size_t hidden, std::mt19937_64& rng,
                              const std::string& prefix = "enc") {
  init_lstm(ps, prefix + ".l1", 1, hidden, rng);
  init_lstm(ps, prefix + ".l2", hidden, hidden, rng);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update from the gradients accumulated in `ps`.
inline void adam_step(ParamSet& ps, const AdamConfig& cfg) {
  const auto t = ps.step_count() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [name, p] : ps.entries()) {
    if (!p.trainable) continue;
    if (p.grad.shape != p.value.shape) {
      throw Error(Errc::ShapeMismatch, "gradient of " + name + " has shape " + ad::shape_str(p.grad.shape));
    }
    auto& mom = ps.moments()[name];
    if (mom.first.shape != p.value.shape) {
      mom.first = Tensor::zeros(p.value.shape);
      mom.second = Tensor::zeros(p.value.shape);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = p.grad[i];
      mom.first[i] = cfg.beta1 * mom.first[i] + (1.0 - cfg.beta1) * gi;
      mom.second[i] = cfg.beta2 * mom.second[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = mom.first[i] / c1;
      const double vhat = mom.second[i] / c2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  ps.set_step_count(t);
}

// ---------------------------------------------------------------------------
// Parameter files: "WCPS", u32 version, u64 meta count, (string key, string
// value)*, u64 entry count, then per entry: string name, u8 trainable,
// u32 rank, u64 dims[rank], f64 values[]. Strings are u32-length-prefixed.

inline constexpr char kParamMagic[4] = {'W', 'C', 'P', 'S'};
inline constexpr std::uint32_t kParamVersion = 1;

inline void save_params(const ParamSet& ps, std::ostream& out) {
  out.write(kParamMagic, 4);
  binio::write_u32(out, kParamVersion);
  binio::write_u64(out, ps.meta().size());
  for (const auto& [k, v] : ps.meta()) {
    binio::write_string(out, k);
    binio::write_string(out, v);
  }
  binio::write_u64(out, ps.entries().size());
  for (const auto& [name, p] : ps.entries()) {
    binio::write_string(out, name);
    const char trainable = p.trainable ? 1 : 0;
    out.write(&trainable, 1);
    binio::write_u32(out, static_cast<std::uint32_t>(p.value.shape.size()));
    for (auto d : p.value.shape) binio::write_u64(out, d);
    for (double v : p.value.values) binio::write_f64(out, v);
  }
  if (!out) throw Error(Errc::Io, "failed writing parameter file");
}

inline ParamSet load_params(std::istream& in) {
  char magic[4];
  binio::read_exact(in, magic, 4);
  if (!std::equal(magic, magic + 4, kParamMagic)) throw Error(Errc::FormatError, "not a parameter file");
  if (binio::read_u32(in) != kParamVersion) throw Error(Errc::FormatError, "unsupported parameter file version");
  ParamSet ps;
  const auto n_meta = binio::read_u64(in);
  for (std::uint64_t m = 0; m < n_meta; ++m) {
    auto k = binio::read_string(in);
    ps.meta()[k] = binio::read_string(in);
  }
  const auto n = binio::read_u64(in);
  for (std::uint64_t e = 0; e < n; ++e) {
    auto name = binio::read_string(in);
    char trainable = 0;
    binio::read_exact(in, &trainable, 1);
    const auto rank = binio::read_u32(in);
    if (rank > Shape::kMaxRank) throw Error(Errc::FormatError, "implausible tensor rank");
    Shape shape(rank);
    for (auto& d : shape) d = binio::read_u64(in);
    const auto count = ad::numel(shape);
    if (count > (1ull << 32)) throw Error(Errc::FormatError, "implausible tensor size");
    std::vector<double> values(count);
    for (auto& v : values) v = binio::read_f64(in);
    ps.add(name, Tensor(std::move(shape), std::move(values)), trainable != 0);
  }
  return ps;
}

inline void save_params(const ParamSet& ps, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  save_params(ps, out);
}

inline ParamSet load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingParamset, "cannot open parameter file " + path);
  return load_params(in);
}

}  // namespace wavecast::nn
