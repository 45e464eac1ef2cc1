#include "ntklab/centering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

namespace {

constexpr double kDegenerateNorm = 1e-12;

Vec column_means(const Mat& m) {
  Vec mean(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) mean[j] += r[j];
  }
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

Mat subtract_row(const Mat& m, std::span<const double> v) {
  if (v.size() != m.cols()) throw DimensionError("centering: mean vector length mismatch");
  Mat out = m;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] -= v[j];
  }
  return out;
}

Mat outer(std::span<const double> a, std::span<const double> b, double s = 1.0) {
  Mat m(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = s * a[i] * b[j];
  return m;
}

/// Rows of m scaled by d_i.
Mat scale_rows(const Mat& m, std::span<const double> d) {
  Mat out = m;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= d[i];
  return out;
}

/// Rank-one part of F F^T once F = F~ + 1 nu^T, with lambda = F~ nu. The split
/// form a a^T - lambda lambda^T / ||nu||^2 needs ||nu|| > 0; otherwise the
/// expanded form lambda 1^T + 1 lambda^T + ||nu||^2 1 1^T is used.
Mat mean_part(std::span<const double> lam, double nrm, bool split) {
  const std::size_t n = lam.size();
  Mat m(n, n);
  if (split) {
    Vec a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = nrm + lam[i] / nrm;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = a[i] * a[j] - lam[i] * lam[j] / (nrm * nrm);
  } else {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) = lam[i] + lam[j] + nrm * nrm;
  }
  return m;
}

double relative_residual(const Mat& approx, const Mat& exact) {
  const double diff = frobenius_norm(subtract(approx, exact));
  const double scale = frobenius_norm(exact);
  return scale > 0.0 ? diff / scale : diff;
}

struct IdentityPieces {
  Mat Ft, Bt, FtFt, BtBt, BB, K;
  Vec lam, zeta;
  double nu_norm = 0.0, eta_norm = 0.0;
  bool split_nu = false, split_eta = false;
  Mat reconstructed;
  std::map<std::string, double> corrections;
};

IdentityPieces identity_pieces(const Params& p, const Mat& X, const ExpectationEstimates& est) {
  IdentityPieces s;
  PenultimateFactors pf = penultimate_factors(p, X);
  s.Ft = subtract_row(pf.F, est.nu);
  s.Bt = subtract_row(pf.B, est.eta);
  s.lam = matvec(s.Ft, est.nu);
  s.zeta = matvec(s.Bt, est.eta);
  s.nu_norm = norm2(est.nu);
  s.eta_norm = norm2(est.eta);
  s.split_nu = s.nu_norm > kDegenerateNorm;
  s.split_eta = s.eta_norm > kDegenerateNorm;
  s.FtFt = gram(s.Ft);
  s.BtBt = gram(s.Bt);
  s.BB = gram(pf.B);
  s.K = hadamard(gram(pf.F), s.BB);

  // K_{L-2} = F~F~^T o B~B~^T + (FF^T - F~F~^T) o BB^T + (BB^T - B~B~^T) o F~F~^T
  const Mat nu_part = mean_part(s.lam, s.nu_norm, s.split_nu);
  const Mat eta_part = mean_part(s.zeta, s.eta_norm, s.split_eta);
  s.reconstructed = add(hadamard(s.FtFt, s.BtBt),
                        add(hadamard(nu_part, s.BB), hadamard(eta_part, s.FtFt)));

  double lambda_bb = 0.0, zeta_ff = 0.0, lambda_b = 0.0, gamma_f = 0.0;
  if (s.split_nu) {
    lambda_bb = lambda_max(hadamard(outer(s.lam, s.lam, 1.0 / (s.nu_norm * s.nu_norm)), s.BB));
    Vec d(s.lam.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = s.lam[i] / s.nu_norm;
    const double op = op_norm(scale_rows(s.Bt, d));
    lambda_b = op * op;
  }
  if (s.split_eta) {
    zeta_ff =
        lambda_max(hadamard(outer(s.zeta, s.zeta, 1.0 / (s.eta_norm * s.eta_norm)), s.FtFt));
    Vec d(s.zeta.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = s.zeta[i] / s.eta_norm;
    const double op = op_norm(scale_rows(s.Ft, d));
    gamma_f = op * op;
  }
  s.corrections = {{"lambda_BB", lambda_bb},
                   {"zeta_FF", zeta_ff},
                   {"lambda_B", lambda_b},
                   {"gamma_F", gamma_f}};
  return s;
}

double max_abs_entry(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

PenultimateFactors penultimate_factors(const Params& p, const Mat& X) {
  const std::size_t L = p.depth();
  BatchTrace tr = forward_batch(p, X);
  std::vector<Mat> B = backprop_rows(p, tr);
  return {std::move(tr.F[L - 2]), std::move(B[L - 1])};
}

std::size_t default_mean_samples(std::size_t n) { return std::max<std::size_t>(1000, 20 * n); }

ExpectationEstimates estimate_means(const Params& p, const DataSpec& spec, std::size_t M,
                                    std::uint64_t seed) {
  if (M < 100) throw ConfigError("M", "mean estimation needs at least 100 samples");
  const Dataset ds = sample(spec, M, seed);
  const PenultimateFactors pf = penultimate_factors(p, ds.X);
  ExpectationEstimates est;
  est.nu = column_means(pf.F);
  est.eta = column_means(pf.B);
  const Mat Ft = subtract_row(pf.F, est.nu);
  const Mat Bt = subtract_row(pf.B, est.eta);
  est.A = scaled(matmul(transpose(Ft), Bt), 1.0 / static_cast<double>(M));
  est.M = M;
  est.seed = seed;
  return est;
}

Mat centered_jacobian(const Params& p, const Mat& X, const ExpectationEstimates& est) {
  const PenultimateFactors pf = penultimate_factors(p, X);
  if (est.A.rows() != pf.F.cols() || est.A.cols() != pf.B.cols())
    throw DimensionError("centered_jacobian: estimates do not match the network shape");
  Mat Jt = khatri_rao(subtract_row(pf.F, est.nu), subtract_row(pf.B, est.eta));
  return subtract_row(Jt, est.A.data());
}

StepAReport step_a_identity(const Params& p, const Mat& X, const ExpectationEstimates& est) {
  if (norm2(est.nu) <= kDegenerateNorm)
    throw ZeroMeanDegenerate("step_a_identity: feature mean vanishes");
  if (norm2(est.eta) <= kDegenerateNorm)
    throw ZeroMeanDegenerate("step_a_identity: backprop mean vanishes");
  IdentityPieces s = identity_pieces(p, X, est);
  StepAReport r;
  r.residual = relative_residual(s.reconstructed, s.K);
  r.reconstructed = std::move(s.reconstructed);
  r.lambda_diag = s.lam;
  r.gamma_diag = s.zeta;
  r.lambda_opnorm = max_abs_entry(s.lam) / s.nu_norm;
  r.gamma_opnorm = max_abs_entry(s.zeta) / s.eta_norm;
  r.correction_opnorms = std::move(s.corrections);
  return r;
}

CenteringGapReport gap_report(const Params& p, const Mat& X, const ExpectationEstimates& est) {
  IdentityPieces s = identity_pieces(p, X, est);
  CenteringGapReport g;
  g.identity_residual = relative_residual(s.reconstructed, s.K);
  g.nu_norm = s.nu_norm;
  g.eta_norm = s.eta_norm;
  g.degenerate = !s.split_nu || !s.split_eta;

  const JacobianBundle b = assemble_jacobian(p, X, {.materialize = false, .kernel = false});
  g.lmin_K = lambda_min(ntk_layerwise(b));
  g.lmin_KL2 = lambda_min(s.K);
  g.lmin_FB = lambda_min(hadamard(s.FtFt, s.BtBt));

  const Mat Jt = centered_jacobian(p, X, est);
  g.lmin_tilde = lambda_min(gram(Jt));

  double step_b = 0.0;
  const double a2 = dot(est.A.data(), est.A.data());
  if (a2 > 0.0) {
    const Vec lam_b = matvec(Jt, est.A.data());
    step_b = dot(lam_b, lam_b) / a2;
  }
  g.correction_opnorms = std::move(s.corrections);
  g.correction_opnorms["step_b"] = step_b;
  const double lb = g.correction_opnorms.at("lambda_B");
  const double gf = g.correction_opnorms.at("gamma_F");
  g.max_correction = std::max({lb, gf, step_b});
  g.sum_correction = lb + gf + step_b;
  return g;
}

double empirical_psi1(std::span<const double> sample) {
  if (sample.empty()) return 0.0;
  double best = 0.0;
  for (int p : {1, 2, 4, 8}) {
    double m = 0.0;
    for (double x : sample) m += std::pow(std::abs(x), p);
    m /= static_cast<double>(sample.size());
    best = std::max(best, std::pow(m, 1.0 / p) / p);
  }
  return best;
}

RowStats row_stats(const Mat& Jt, std::size_t n_directions, std::uint64_t seed) {
  if (Jt.rows() < 2) throw std::invalid_argument("row_stats: need at least two rows");
  RowStats st;
  st.n_directions = n_directions;
  st.eta_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < Jt.rows(); ++i) {
    const double n = norm2(Jt.row(i));
    st.eta_min = std::min(st.eta_min, n);
    st.eta_max = std::max(st.eta_max, n);
  }
  for (std::size_t k = 0; k < n_directions; ++k) {
    CounterRng rng(derive_seed(seed, "direction", k));
    Vec u(Jt.cols());
    for (double& v : u) v = rng.normal();
    const double nu = norm2(u);
    for (double& v : u) v /= nu;
    st.psi1_est = std::max(st.psi1_est, empirical_psi1(matvec(Jt, u)));
  }
  return st;
}

TailProbe hw_tail_probe(const Params& p, const DataSpec& spec, const Mat& U, std::size_t M,
                        std::uint64_t seed) {
  const Dataset ds = sample(spec, M, seed);
  const PenultimateFactors pf = penultimate_factors(p, ds.X);
  if (U.rows() != pf.F.cols() || U.cols() != pf.B.cols())
    throw DimensionError("hw_tail_probe: U must be n_{L-2} x n_{L-1}");
  const Mat Ft = subtract_row(pf.F, column_means(pf.F));
  const Mat Bt = subtract_row(pf.B, column_means(pf.B));
  const Mat FU = matmul(Ft, U);
  Vec gamma(M);
  for (std::size_t i = 0; i < M; ++i) gamma[i] = dot(FU.row(i), Bt.row(i));
  double mean = 0.0;
  for (double v : gamma) mean += v;
  mean /= static_cast<double>(M);
  double var = 0.0;
  for (double& v : gamma) {
    v -= mean;
    var += v * v;
  }
  TailProbe tp;
  tp.stddev = std::sqrt(var / static_cast<double>(M));
  tp.u_frobenius = frobenius_norm(U);
  tp.psi1_est = empirical_psi1(gamma);
  auto exceed = [&](double t) {
    std::size_t c = 0;
    for (double v : gamma)
      if (std::abs(v) > t) ++c;
    return static_cast<double>(c) / static_cast<double>(M);
  };
  for (double m : {1.0, 2.0, 4.0, 8.0}) {
    tp.t.push_back(m * tp.u_frobenius);
    tp.exceedance.push_back(exceed(m * tp.u_frobenius));
    tp.t_std.push_back(m * tp.stddev);
    tp.exceedance_std.push_back(exceed(m * tp.stddev));
  }
  return tp;
}

GramOpnorms gram_opnorm_diag(const Params& p, const Mat& X, const ExpectationEstimates& est) {
  const PenultimateFactors pf = penultimate_factors(p, X);
  return {lambda_max(gram(subtract_row(pf.F, est.nu))),
          lambda_max(gram(subtract_row(pf.B, est.eta)))};
}

double last_layer_opnorm_fraction(std::size_t n, std::size_t draws, std::uint64_t seed,
                                  double beta) {
  const double bound = std::log(static_cast<double>(n));
  std::size_t ok = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    CounterRng rng(derive_seed(seed, "last_layer", k));
    double m = 0.0;
    for (std::size_t j = 0; j < n; ++j) m = std::max(m, std::abs(beta * rng.normal()));
    if (m <= bound) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(draws);
}

LayerMeans estimate_layer_means(const Params& p, const DataSpec& spec, std::size_t M,
                                std::uint64_t seed) {
  const Dataset ds = sample(spec, M, seed);
  const BatchTrace tr = forward_batch(p, ds.X);
  const std::vector<Mat> B = backprop_rows(p, tr);
  LayerMeans lm;
  lm.feature.resize(p.depth());
  for (std::size_t l = 1; l < p.depth(); ++l) lm.feature[l] = column_means(tr.F[l]);
  lm.eta = column_means(B[p.depth() - 1]);
  return lm;
}

NormSample norm_sample(const Params& p, const LayerMeans& means, std::span<const double> x) {
  const Mat X = Mat::row_vector(x);
  const BatchTrace tr = forward_batch(p, X);
  const std::vector<Mat> B = backprop_rows(p, tr);
  const std::size_t L = p.depth();
  NormSample s;
  for (std::size_t l = 1; l < L; ++l) {
    auto f = tr.F[l].row(0);
    const double scale = std::sqrt(static_cast<double>(f.size()));
    double c = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j)
      c += (f[j] - means.feature[l][j]) * (f[j] - means.feature[l][j]);
    s.feature.push_back(norm2(f) / scale);
    s.centered_feature.push_back(std::sqrt(c) / scale);
  }
  auto b = B[L - 1].row(0);
  double c = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) c += (b[j] - means.eta[j]) * (b[j] - means.eta[j]);
  s.centered_backprop = std::sqrt(c / static_cast<double>(b.size()));
  return s;
}

}  // namespace ntklab
