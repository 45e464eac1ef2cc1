#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

/// base.widths ends with the undoubled n_{L-1}; the built network has 2 n_{L-1}.
struct AntisymConfig {
  NetConfig base;
  double gamma = 16.0;
  std::uint64_t seed = 0;

  /// The network shape after duplicating the last hidden layer.
  NetConfig doubled() const;
};

/// Layers 1..L-2 standard; W_{L-1} = [W, W] and W_L = [w; -w] with
/// w = sqrt(gamma) beta_L z. The draws of W and z do not depend on gamma.
Params antisym_init(const AntisymConfig& cfg);

struct GammaRow {
  double gamma = 0.0;
  double lmin_K = 0.0;
  double lmin_Kbar = 0.0;  // unit-gamma block kernel
  double bound = 0.0;      // 2 gamma lmin_Kbar
  bool holds = false;
};

std::vector<GammaRow> gamma_scaling_check(const AntisymConfig& cfg, const Mat& X,
                                          const std::vector<double>& gammas);

enum class Optimizer { gd, adam };

Optimizer parse_optimizer(std::string_view name);
std::string to_string(Optimizer o);

struct AdamParams {
  double lr = 1e-3;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  /// GD step size; defaults to 0.5 / lambda_max(K(theta_0)).
  std::optional<double> eta;
  std::size_t T = 2000;
  Optimizer optimizer = Optimizer::gd;
  /// Stop once the loss is at most max(target_loss, target_ratio * L(theta_0)).
  double target_loss = 0.0;
  double target_ratio = 0.0;
  AdamParams adam;
  /// Steps used for the log-linear rate fit.
  std::size_t fit_window = 50;
};

struct TrainReport {
  std::vector<double> losses;
  std::vector<double> radius_trace;
  double rate_fit = 0.0;
  double r2 = 0.0;
  double eta = 0.0;
  bool converged = false;
  Params final_params;
};

/// L(theta) = 0.5 ||F_L(theta) - Y||^2
double loss(const Params& p, const Mat& X, std::span<const double> Y);

/// Full-batch training with gradient J^T (F_L - Y). Throws DivergenceError when
/// the loss exceeds 1e6 L(theta_0) or stops being finite.
TrainReport gd_train(const Params& p0, const Mat& X, std::span<const double> Y,
                     const TrainConfig& tc);

struct LogLinearFit {
  double rate = 0.0;  // exp(slope)
  double r2 = 0.0;
};

/// Least-squares fit of log(values[t]) against t, skipping non-positive entries.
LogLinearFit fit_log_linear(std::span<const double> values);

struct MemorizeResult {
  Params base;
  Vec theta_dir;
  double h = 0.0;
  double residual = 0.0;
  /// (h, residual) for every h tried, in halving order.
  std::vector<std::pair<double, double>> trace;

  /// f*(x) = (f_L(theta_0 + h theta', x) - f_L(theta_0, x)) / h
  Vec evaluate(const Mat& X) const;
};

/// Throws NotWellConditioned when lambda_min(K(theta_0)) <= 1e-8 and
/// PrecisionFloor when no h in [1e-10, 1e-2] reaches eps.
MemorizeResult memorize(const Params& p0, const Mat& X, std::span<const double> Y, double eps);

/// max radius <= 4 sqrt(2 L(theta_0)) / alpha_est
bool radius_check(const TrainReport& report, double alpha_est);

/// Standard normal targets rescaled to ||Y|| = sqrt(N).
Vec normalized_targets(std::size_t n, std::uint64_t seed);

}  // namespace ntklab
