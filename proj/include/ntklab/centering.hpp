#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ntklab/datagen.hpp"
#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

/// Monte-Carlo estimates over M fresh samples: nu = E[f_{L-2}(x)],
/// eta = E[(B_{L-1})_{x:}] and A = E[(f - nu)(b - eta)^T].
struct ExpectationEstimates {
  Vec nu;
  Vec eta;
  Mat A;
  std::size_t M = 0;
  std::uint64_t seed = 0;
};

/// Feature rows F_{L-2} and backprop rows B_{L-1} for a batch of inputs.
struct PenultimateFactors {
  Mat F;
  Mat B;
};

PenultimateFactors penultimate_factors(const Params& p, const Mat& X);

/// Uses sample(spec, M, seed), so a larger M extends the same stream.
ExpectationEstimates estimate_means(const Params& p, const DataSpec& spec, std::size_t M,
                                    std::uint64_t seed);
/// M = max(1000, 20 N).
std::size_t default_mean_samples(std::size_t n);

/// Row i is (f_i - nu) (x) (b_i - eta) - vec(A).
Mat centered_jacobian(const Params& p, const Mat& X, const ExpectationEstimates& est);

struct StepAReport {
  /// K_{L-2} reassembled from the centered pieces and the rank-one corrections.
  Mat reconstructed;
  /// ||reconstructed - K_{L-2}||_F / ||K_{L-2}||_F
  double residual = 0.0;
  /// Diagonal of Lambda (Lambda_ii = nu^T f_i - ||nu||^2) and of Gamma.
  Vec lambda_diag;
  Vec gamma_diag;
  double lambda_opnorm = 0.0;  // ||Lambda / ||nu|| ||_op
  double gamma_opnorm = 0.0;   // ||Gamma / ||eta|| ||_op
  std::map<std::string, double> correction_opnorms;
};

/// Throws ZeroMeanDegenerate when ||nu|| or ||eta|| is at most 1e-12.
StepAReport step_a_identity(const Params& p, const Mat& X, const ExpectationEstimates& est);

struct CenteringGapReport {
  double lmin_K = 0.0;      // full kernel
  double lmin_KL2 = 0.0;    // K_{L-2}
  double lmin_FB = 0.0;     // both factors centered
  double lmin_tilde = 0.0;  // fully centered rows
  /// "lambda_B" = ||(Lambda/||nu||) B~||_op^2, "gamma_F" = ||(Gamma/||eta||) F~||_op^2,
  /// "step_b" = ||lambda_b||^2 / ||A||_F^2, plus the exact correction matrices of
  /// the step-(a) identity ("lambda_BB", "zeta_FF").
  std::map<std::string, double> correction_opnorms;
  /// max of lambda_B, gamma_F and step_b.
  double max_correction = 0.0;
  double sum_correction = 0.0;
  double identity_residual = 0.0;
  double nu_norm = 0.0;
  double eta_norm = 0.0;
  bool degenerate = false;
};

/// Never throws ZeroMeanDegenerate: a vanishing mean uses the unsplit form of
/// the identity and reports zero for the corresponding correction.
CenteringGapReport gap_report(const Params& p, const Mat& X, const ExpectationEstimates& est);

struct RowStats {
  double eta_min = 0.0;
  double eta_max = 0.0;
  double psi1_est = 0.0;
  std::size_t n_directions = 0;
};

/// Empirical psi_1 of a scalar sample: max over p in {1,2,4,8} of (mean |x|^p)^(1/p) / p.
double empirical_psi1(std::span<const double> sample);

RowStats row_stats(const Mat& Jt, std::size_t n_directions, std::uint64_t seed);

struct TailProbe {
  std::vector<double> t;           // thresholds
  std::vector<double> exceedance;  // P(|Gamma| > t)
  std::vector<double> t_std;       // thresholds on the std(Gamma) grid
  std::vector<double> exceedance_std;
  double psi1_est = 0.0;
  double stddev = 0.0;
  double u_frobenius = 0.0;
};

/// Gamma(x) = f~^T U b~ minus its sample mean over M fresh draws. Exceedance is
/// reported at {1,2,4,8}·||U||_F and at {1,2,4,8}·std(Gamma).
TailProbe hw_tail_probe(const Params& p, const DataSpec& spec, const Mat& U, std::size_t M,
                        std::uint64_t seed);

struct GramOpnorms {
  double opF = 0.0;
  double opB = 0.0;
};

GramOpnorms gram_opnorm_diag(const Params& p, const Mat& X, const ExpectationEstimates& est);

/// Fraction of `draws` last-layer vectors w ~ N(0, beta^2 I_n) with
/// max_j |w_j| <= log n.
double last_layer_opnorm_fraction(std::size_t n, std::size_t draws, std::uint64_t seed,
                                  double beta = 1.0);

/// Normalized norms at one input: ||f_l||/sqrt(n_l) and ||f_l - E f_l||/sqrt(n_l)
/// for l = 1..L-1, and ||b - eta||/sqrt(n_{L-1}) for the last backprop row.
struct NormSample {
  std::vector<double> feature;
  std::vector<double> centered_feature;
  double centered_backprop = 0.0;
};

/// Layer means for every hidden layer plus eta, estimated from M fresh samples.
struct LayerMeans {
  std::vector<Vec> feature;  // index l = 1..L-1 (0 unused)
  Vec eta;
};

LayerMeans estimate_layer_means(const Params& p, const DataSpec& spec, std::size_t M,
                                std::uint64_t seed);
NormSample norm_sample(const Params& p, const LayerMeans& means, std::span<const double> x);

}  // namespace ntklab
