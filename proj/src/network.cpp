#include "ntklab/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>

#include "ntklab/errors.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  throw ConfigError("activation", "unknown activation '" + std::string(name) + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
  }
  return "unknown";
}

ActivationKind activation_kind(Activation a) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  switch (a) {
    case Activation::sigmoid: return {a, 0.25, 0.1, true, true};
    case Activation::tanh: return {a, 1.0, 1.0, true, true};
    case Activation::softplus: return {a, 1.0, 0.25, true, true};
    case Activation::relu: return {a, 1.0, nan, false, true};
    case Activation::identity: return {a, 1.0, nan, true, false};
  }
  return {};
}

namespace {

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

ActPair act_pair(Activation a, double t) {
  switch (a) {
    case Activation::sigmoid: {
      const double s = sigmoid(t);
      return {s, s * (1.0 - s)};
    }
    case Activation::tanh: {
      const double v = std::tanh(t);
      return {v, 1.0 - v * v};
    }
    case Activation::softplus:
      return {std::log1p(std::exp(-std::abs(t))) + std::max(t, 0.0), sigmoid(t)};
    case Activation::relu:
      return {std::max(t, 0.0), t > 0 ? 1.0 : 0.0};
    case Activation::identity:
      return {t, 1.0};
  }
  return {0.0, 0.0};
}

double NetConfig::beta(std::size_t l) const {
  if (betas.empty()) return 1.0;
  return betas.at(l - 1);
}

void NetConfig::validate() const {
  if (widths.size() < 2) throw ConfigError("widths", "depth L must be at least 2");
  for (std::size_t w : widths)
    if (w < 1) throw ConfigError("widths", "all widths must be at least 1");
  if (!betas.empty()) {
    if (betas.size() != widths.size())
      throw ConfigError("betas", "expected one beta per layer (" + std::to_string(widths.size()) +
                                     "), got " + std::to_string(betas.size()));
    for (double b : betas)
      if (!(b > 0.0) || !std::isfinite(b)) throw ConfigError("betas", "all betas must be > 0");
  }
  if (!(pyramidal_ratio > 0.0)) throw ConfigError("pyramidal_ratio", "must be positive");
  for (std::size_t l = 1; l < widths.size(); ++l) {
    if (static_cast<double>(widths[l]) > pyramidal_ratio * static_cast<double>(widths[l - 1]))
      throw ConfigError("widths", "n_" + std::to_string(l) + " = " + std::to_string(widths[l]) +
                                      " exceeds pyramidal_ratio * n_" + std::to_string(l - 1));
  }
  const ActivationKind kind = activation_kind(activation);
  if ((!kind.smooth || !kind.nonlinear) && !allow_nonsmooth)
    throw ConfigError("activation", to_string(activation) +
                                        " violates the smooth nonlinear activation assumption; "
                                        "pass allow_nonsmooth to use it anyway");
}

std::vector<std::size_t> Params::widths() const {
  std::vector<std::size_t> w;
  for (const Mat& m : weights) w.push_back(m.rows());
  return w;
}

std::size_t Params::parameter_count() const {
  std::size_t n = 0;
  for (const Mat& m : weights) n += m.size();
  return n;
}

Vec Params::flatten() const {
  Vec theta;
  theta.reserve(parameter_count());
  for (const Mat& m : weights) theta.insert(theta.end(), m.data().begin(), m.data().end());
  return theta;
}

void check_shapes(const Params& p) {
  if (p.weights.size() < 2) throw DimensionError("Params: depth must be at least 2");
  for (std::size_t l = 1; l < p.weights.size(); ++l) {
    if (p.weights[l].rows() != p.weights[l - 1].cols())
      throw DimensionError("Params: W_" + std::to_string(l + 1) + " has " +
                           std::to_string(p.weights[l].rows()) + " rows, expected " +
                           std::to_string(p.weights[l - 1].cols()));
  }
  if (p.weights.back().cols() != 1) throw DimensionError("Params: W_L must be a column");
}

Params with_parameters(const Params& like, std::span<const double> theta) {
  if (theta.size() != like.parameter_count())
    throw DimensionError("with_parameters: theta has " + std::to_string(theta.size()) +
                         " entries, expected " + std::to_string(like.parameter_count()));
  Params p = like;
  std::size_t off = 0;
  for (Mat& m : p.weights) {
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(off), m.size(), m.data().begin());
    off += m.size();
  }
  return p;
}

Params shifted(const Params& like, std::span<const double> direction, double s) {
  if (direction.size() != like.parameter_count())
    throw DimensionError("shifted: direction length mismatch");
  Params p = like;
  std::size_t off = 0;
  for (Mat& m : p.weights)
    for (double& v : m.data()) v += s * direction[off++];
  return p;
}

Params init_standard(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const std::size_t L = cfg.depth();
  Params p;
  p.activation = cfg.activation;
  for (std::size_t l = 1; l <= L; ++l) {
    const std::size_t rows = cfg.widths[l - 1];
    const std::size_t cols = l < L ? cfg.widths[l] : 1;
    const double sd = l < L ? cfg.beta(l) / std::sqrt(static_cast<double>(rows)) : cfg.beta(l);
    CounterRng rng(derive_seed(seed, "layer", l));
    Mat w(rows, cols);
    for (double& v : w.data()) v = sd * rng.normal();
    p.weights.push_back(std::move(w));
  }
  return p;
}

Params init_zeros(const NetConfig& cfg) {
  cfg.validate();
  const std::size_t L = cfg.depth();
  Params p;
  p.activation = cfg.activation;
  for (std::size_t l = 1; l <= L; ++l)
    p.weights.emplace_back(cfg.widths[l - 1], l < L ? cfg.widths[l] : 1);
  return p;
}

ForwardTrace forward(const Params& p, std::span<const double> x) {
  check_shapes(p);
  if (x.size() != p.input_dim())
    throw DimensionError("forward: input has " + std::to_string(x.size()) + " entries, expected " +
                         std::to_string(p.input_dim()));
  const std::size_t L = p.depth();
  ForwardTrace tr;
  tr.g.emplace_back(x.begin(), x.end());
  tr.f.emplace_back(x.begin(), x.end());
  for (std::size_t l = 1; l < L; ++l) {
    Vec g = matvec_transposed(p.weights[l - 1], tr.f.back());
    Vec f(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) f[j] = act_pair(p.activation, g[j]).value;
    tr.g.push_back(std::move(g));
    tr.f.push_back(std::move(f));
  }
  tr.out = matvec_transposed(p.weights[L - 1], tr.f.back())[0];
  tr.g.push_back(Vec{tr.out});
  return tr;
}

BatchTrace forward_batch(const Params& p, const Mat& X) {
  check_shapes(p);
  if (X.cols() != p.input_dim())
    throw DimensionError("forward_batch: inputs have " + std::to_string(X.cols()) +
                         " columns, expected " + std::to_string(p.input_dim()));
  const std::size_t L = p.depth();
  BatchTrace tr;
  tr.G.push_back(X);
  tr.F.push_back(X);
  tr.dphi.emplace_back();
  for (std::size_t l = 1; l < L; ++l) {
    Mat g = matmul(tr.F.back(), p.weights[l - 1]);
    Mat f(g.rows(), g.cols());
    Mat d(g.rows(), g.cols());
    auto gs = g.data();
    auto fs = f.data();
    auto ds = d.data();
    for (std::size_t k = 0; k < gs.size(); ++k) {
      const ActPair ap = act_pair(p.activation, gs[k]);
      fs[k] = ap.value;
      ds[k] = ap.deriv;
    }
    tr.G.push_back(std::move(g));
    tr.F.push_back(std::move(f));
    tr.dphi.push_back(std::move(d));
  }
  tr.out = matmul(tr.F.back(), p.weights[L - 1]).storage();
  return tr;
}

Vec predict(const Params& p, const Mat& X) { return forward_batch(p, X).out; }

double lipschitz_estimate(const Params& p, std::size_t layer, std::size_t probes,
                          std::uint64_t seed) {
  if (layer < 1 || layer >= p.depth())
    throw std::invalid_argument("lipschitz_estimate: layer must lie in [1, L-1]");
  const std::size_t d = p.input_dim();
  double best = 0.0;
  for (std::size_t k = 0; k < probes; ++k) {
    CounterRng rng(derive_seed(seed, "lipschitz", k));
    Vec x(d), dx(d);
    for (double& v : x) v = rng.normal();
    for (double& v : dx) v = rng.normal();
    // Alternate secant pairs and near-tangent pairs.
    const double scale = (k % 2 == 0) ? 1.0 : 1e-6;
    Vec y(d);
    for (std::size_t j = 0; j < d; ++j) y[j] = x[j] + scale * dx[j];
    const ForwardTrace a = forward(p, x);
    const ForwardTrace b = forward(p, y);
    double num = 0.0;
    for (std::size_t j = 0; j < a.f[layer].size(); ++j) {
      const double diff = a.f[layer][j] - b.f[layer][j];
      num += diff * diff;
    }
    double den = 0.0;
    for (std::size_t j = 0; j < d; ++j) den += (x[j] - y[j]) * (x[j] - y[j]);
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

namespace {

constexpr char kMagic[4] = {'N', 'T', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw std::runtime_error("load_params: truncated checkpoint");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void save_params(const Params& p, std::ostream& out) {
  check_shapes(p);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.activation));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.depth()));
  for (std::size_t l = 0; l < p.depth(); ++l) {
    const Mat& w = p.weights[l];
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l + 1));
    put<std::uint64_t>(out, w.rows());
    put<std::uint64_t>(out, w.cols());
    for (double v : w.data()) put<double>(out, v);
  }
  if (!out) throw std::runtime_error("save_params: write failed");
}

Params load_params(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_params: bad magic");
  if (get<std::uint32_t>(in) != kVersion) throw std::runtime_error("load_params: unknown version");
  const auto act = get<std::uint32_t>(in);
  if (act > static_cast<std::uint32_t>(Activation::identity))
    throw std::runtime_error("load_params: bad activation tag");
  Params p;
  p.activation = static_cast<Activation>(act);
  const auto depth = get<std::uint32_t>(in);
  for (std::uint32_t l = 1; l <= depth; ++l) {
    if (get<std::uint32_t>(in) != l) throw std::runtime_error("load_params: layer tag mismatch");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    std::vector<double> entries(rows * cols);
    for (double& v : entries) v = get<double>(in);
    p.weights.emplace_back(rows, cols, std::move(entries));
  }
  check_shapes(p);
  return p;
}

}  // namespace ntklab
