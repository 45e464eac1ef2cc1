#include "ntklab/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

NetConfig AntisymConfig::doubled() const {
  NetConfig c = base;
  if (c.widths.size() < 3) throw ConfigError("widths", "antisymmetric init needs depth L >= 3");
  c.widths.back() *= 2;
  return c;
}

Params antisym_init(const AntisymConfig& cfg) {
  if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma))
    throw ConfigError("gamma", "gamma must be positive");
  const NetConfig full = cfg.doubled();
  full.validate();
  const NetConfig& base = cfg.base;
  const std::size_t L = base.depth();
  Params p;
  p.activation = base.activation;
  for (std::size_t l = 1; l + 1 < L; ++l) {
    const std::size_t rows = base.widths[l - 1];
    const double sd = base.beta(l) / std::sqrt(static_cast<double>(rows));
    CounterRng rng(derive_seed(cfg.seed, "layer", l));
    Mat w(rows, base.widths[l]);
    for (double& v : w.data()) v = sd * rng.normal();
    p.weights.push_back(std::move(w));
  }
  const std::size_t n_in = base.widths[L - 2];
  const std::size_t n_half = base.widths[L - 1];
  {
    const double sd = base.beta(L - 1) / std::sqrt(static_cast<double>(n_in));
    CounterRng rng(derive_seed(cfg.seed, "layer", L - 1));
    Mat w(n_in, 2 * n_half);
    for (std::size_t i = 0; i < n_in; ++i)
      for (std::size_t j = 0; j < n_half; ++j) {
        const double v = sd * rng.normal();
        w(i, j) = v;
        w(i, j + n_half) = v;
      }
    p.weights.push_back(std::move(w));
  }
  {
    const double sd = std::sqrt(cfg.gamma) * base.beta(L);
    CounterRng rng(derive_seed(cfg.seed, "layer", L));
    Mat w(2 * n_half, 1);
    for (std::size_t j = 0; j < n_half; ++j) {
      const double v = sd * rng.normal();
      w(j, 0) = v;
      w(j + n_half, 0) = -v;
    }
    p.weights.push_back(std::move(w));
  }
  return p;
}

std::vector<GammaRow> gamma_scaling_check(const AntisymConfig& cfg, const Mat& X,
                                          const std::vector<double>& gammas) {
  AntisymConfig unit = cfg;
  unit.gamma = 1.0;
  const Params p1 = antisym_init(unit);
  const std::size_t L = p1.depth();
  const JacobianBundle b1 = assemble_jacobian(p1, X, {.materialize = false, .kernel = false});
  // At gamma = 1 the W_{L-1} block is [J1, -J1], so its kernel is twice K-bar.
  const double lmin_bar = lambda_min(scaled(kernel_block(b1, L - 1), 0.5));
  std::vector<GammaRow> rows;
  for (double g : gammas) {
    AntisymConfig c = cfg;
    c.gamma = g;
    const Params p = antisym_init(c);
    const JacobianBundle b = assemble_jacobian(p, X, {.materialize = false, .kernel = false});
    GammaRow r;
    r.gamma = g;
    r.lmin_K = lambda_min(ntk_layerwise(b));
    r.lmin_Kbar = lmin_bar;
    r.bound = 2.0 * g * lmin_bar;
    r.holds = r.lmin_K >= r.bound - 1e-9 * (1.0 + std::abs(r.bound));
    rows.push_back(r);
  }
  return rows;
}

Optimizer parse_optimizer(std::string_view name) {
  if (name == "gd") return Optimizer::gd;
  if (name == "adam") return Optimizer::adam;
  throw ConfigError("optimizer", "unknown optimizer '" + std::string(name) + "'");
}

std::string to_string(Optimizer o) { return o == Optimizer::gd ? "gd" : "adam"; }

namespace {

double half_squared_residual(std::span<const double> out, std::span<const double> Y, Vec& r) {
  r.resize(out.size());
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    r[i] = out[i] - Y[i];
    s += r[i] * r[i];
  }
  return 0.5 * s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

double loss(const Params& p, const Mat& X, std::span<const double> Y) {
  if (Y.size() != X.rows()) throw DimensionError("loss: target length mismatch");
  Vec r;
  return half_squared_residual(predict(p, X), Y, r);
}

LogLinearFit fit_log_linear(std::span<const double> values) {
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0, syy = 0;
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (!(values[t] > 0.0)) continue;
    const double x = static_cast<double>(t);
    const double y = std::log(values[t]);
    n += 1;
    st += x;
    sy += y;
    stt += x * x;
    sty += x * y;
    syy += y * y;
  }
  LogLinearFit fit;
  if (n < 2) return fit;
  const double cov = sty - st * sy / n;
  const double vt = stt - st * st / n;
  const double vy = syy - sy * sy / n;
  const double slope = cov / vt;
  fit.rate = std::exp(slope);
  fit.r2 = vy > 0 ? (cov * cov) / (vt * vy) : 1.0;
  return fit;
}

TrainReport gd_train(const Params& p0, const Mat& X, std::span<const double> Y,
                     const TrainConfig& tc) {
  if (Y.size() != X.rows()) throw DimensionError("gd_train: target length mismatch");
  if (tc.eta && !(*tc.eta > 0.0)) throw ConfigError("eta", "step size must be positive");
  const JacobianOptions factors_only{.materialize = false, .kernel = false};

  Params p = p0;
  const Vec theta0 = p0.flatten();
  Vec theta = theta0;
  JacobianBundle b = assemble_jacobian(p, X, factors_only);
  Vec r;
  const double L0 = half_squared_residual(b.out, Y, r);

  TrainReport rep;
  if (tc.optimizer == Optimizer::gd)
    rep.eta = tc.eta ? *tc.eta : 0.5 / lambda_max(ntk_layerwise(b));
  else
    rep.eta = tc.adam.lr;
  rep.losses.push_back(L0);
  rep.radius_trace.push_back(0.0);
  const double target = std::max(tc.target_loss, tc.target_ratio * L0);

  Vec m(theta.size(), 0.0), v(theta.size(), 0.0);
  double b1t = 1.0, b2t = 1.0;
  for (std::size_t t = 0; t < tc.T && rep.losses.back() > target; ++t) {
    const Vec grad = jacobian_transpose_apply(b, r);
    if (tc.optimizer == Optimizer::gd) {
      for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= rep.eta * grad[k];
    } else {
      const AdamParams& a = tc.adam;
      b1t *= a.b1;
      b2t *= a.b2;
      for (std::size_t k = 0; k < theta.size(); ++k) {
        m[k] = a.b1 * m[k] + (1 - a.b1) * grad[k];
        v[k] = a.b2 * v[k] + (1 - a.b2) * grad[k] * grad[k];
        const double mh = m[k] / (1 - b1t);
        const double vh = v[k] / (1 - b2t);
        theta[k] -= a.lr * mh / (std::sqrt(vh) + a.eps);
      }
    }
    p = with_parameters(p0, theta);
    b = assemble_jacobian(p, X, factors_only);
    const double lt = half_squared_residual(b.out, Y, r);
    rep.losses.push_back(lt);
    rep.radius_trace.push_back(distance(theta, theta0));
    if (!std::isfinite(lt) || lt > 1e6 * L0)
      throw DivergenceError("gd_train: loss diverged at step " + std::to_string(t + 1),
                            rep.losses);
  }
  rep.converged = rep.losses.back() <= target;
  const std::size_t window = std::min(rep.losses.size(), tc.fit_window + 1);
  const LogLinearFit fit = fit_log_linear(std::span<const double>(rep.losses).first(window));
  rep.rate_fit = fit.rate;
  rep.r2 = fit.r2;
  rep.final_params = std::move(p);
  return rep;
}

Vec MemorizeResult::evaluate(const Mat& X) const {
  const Vec f0 = predict(base, X);
  const Vec fh = predict(shifted(base, theta_dir, h), X);
  Vec out(f0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (fh[i] - f0[i]) / h;
  return out;
}

MemorizeResult memorize(const Params& p0, const Mat& X, std::span<const double> Y, double eps) {
  if (Y.size() != X.rows()) throw DimensionError("memorize: target length mismatch");
  const JacobianBundle b = assemble_jacobian(p0, X);
  const double lmin = lambda_min(b.K);
  if (!(lmin > 1e-8))
    throw NotWellConditioned("memorize: lambda_min(K) = " + std::to_string(lmin), lmin);
  const double ridge = 1e-12 * trace(b.K) / static_cast<double>(X.rows());

  MemorizeResult res;
  res.base = p0;
  res.theta_dir = least_norm_solve(b.J, Y, ridge);
  double best = std::numeric_limits<double>::infinity();
  double best_h = 0.0;
  for (double h = 1e-2; h >= 1e-10; h *= 0.5) {
    res.h = h;
    const Vec fstar = res.evaluate(X);
    double s = 0.0;
    for (std::size_t i = 0; i < fstar.size(); ++i) s += (fstar[i] - Y[i]) * (fstar[i] - Y[i]);
    const double rn = std::sqrt(s);
    res.trace.emplace_back(h, rn);
    if (rn < best) {
      best = rn;
      best_h = h;
    }
    if (rn <= eps) {
      res.residual = rn;
      return res;
    }
  }
  throw PrecisionFloor("memorize: residual floor " + std::to_string(best) + " above eps", best,
                       best_h);
}

bool radius_check(const TrainReport& report, double alpha_est) {
  if (report.losses.empty() || report.radius_trace.empty()) return false;
  const double bound = 4.0 * std::sqrt(2.0 * report.losses.front()) / alpha_est;
  return *std::max_element(report.radius_trace.begin(), report.radius_trace.end()) <= bound;
}

Vec normalized_targets(std::size_t n, std::uint64_t seed) {
  CounterRng rng(derive_seed(seed, "targets", 0));
  Vec y(n);
  for (double& v : y) v = rng.normal();
  const double s = std::sqrt(static_cast<double>(n)) / norm2(y);
  for (double& v : y) v *= s;
  return y;
}

}  // namespace ntklab
