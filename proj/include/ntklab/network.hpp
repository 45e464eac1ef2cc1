#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ntklab/linalg.hpp"

namespace ntklab {

enum class Activation { sigmoid, tanh, softplus, relu, identity };

Activation parse_activation(std::string_view name);
std::string to_string(Activation a);

/// Lipschitz data for an activation. lip_Mp is NaN where phi' is not Lipschitz.
struct ActivationKind {
  Activation kind = Activation::sigmoid;
  double lip_M = 0.0;
  double lip_Mp = 0.0;
  bool smooth = true;
  bool nonlinear = true;
};

ActivationKind activation_kind(Activation a);

struct ActPair {
  double value;
  double deriv;
};

ActPair act_pair(Activation a, double t);

/// Architecture: widths n_0..n_{L-1} (n_L = 1 implicit), so depth L equals
/// widths.size(). An empty betas vector means beta_l = 1 for every layer.
struct NetConfig {
  std::vector<std::size_t> widths;
  std::vector<double> betas;
  Activation activation = Activation::sigmoid;
  double pyramidal_ratio = 2.0;
  bool allow_nonsmooth = false;

  std::size_t depth() const { return widths.size(); }
  /// beta_l for l in [1, L].
  double beta(std::size_t l) const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// W_1..W_L stored at weights[0..L-1]; W_l is n_{l-1} x n_l and W_L is an
/// n_{L-1} x 1 column. The parameter vector theta is the concatenation of the
/// row-major entries of each W_l in layer order.
struct Params {
  std::vector<Mat> weights;
  Activation activation = Activation::sigmoid;

  std::size_t depth() const { return weights.size(); }
  std::size_t input_dim() const { return weights.front().rows(); }
  /// n_0..n_{L-1}
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;
  Vec flatten() const;

  friend bool operator==(const Params&, const Params&) = default;
};

/// Throws DimensionError when consecutive shapes do not chain or W_L is not a column.
void check_shapes(const Params& p);

/// Copy of `like` with its entries replaced by `theta`.
Params with_parameters(const Params& like, std::span<const double> theta);
/// like + s * direction, entrywise in theta coordinates.
Params shifted(const Params& like, std::span<const double> direction, double s);

/// Hidden entries ~ N(0, beta_l^2 / n_{l-1}), last layer ~ N(0, beta_L^2).
/// Layer l draws from the child stream derive_seed(seed, "layer", l).
Params init_standard(const NetConfig& cfg, std::uint64_t seed);
Params init_zeros(const NetConfig& cfg);

/// g[0..L] and f[0..L-1], with g[0] = f[0] = x and g[L] = {out}.
struct ForwardTrace {
  std::vector<Vec> g;
  std::vector<Vec> f;
  double out = 0.0;
};

ForwardTrace forward(const Params& p, std::span<const double> x);

/// Batched forward pass. G[l] and F[l] are N x n_l for l = 0..L-1 (G[0] = F[0]
/// = X); dphi[l] = phi'(G[l]) for l >= 1 (dphi[0] is empty).
struct BatchTrace {
  std::vector<Mat> G;
  std::vector<Mat> F;
  std::vector<Mat> dphi;
  Vec out;
};

BatchTrace forward_batch(const Params& p, const Mat& X);
Vec predict(const Params& p, const Mat& X);

/// Max of ||f_l(x) - f_l(x')|| / ||x - x'|| over `probes` Gaussian pairs, half
/// of them far apart and half infinitesimally close. A lower bound on the
/// Lipschitz constant of f_l.
double lipschitz_estimate(const Params& p, std::size_t layer, std::size_t probes,
                          std::uint64_t seed);

/// Binary checkpoint: "NTKP", version, activation, depth, then per layer its
/// index, shape and row-major little-endian doubles.
void save_params(const Params& p, std::ostream& out);
Params load_params(std::istream& in);

}  // namespace ntklab
