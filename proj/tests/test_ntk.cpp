#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "ntklab/csv.hpp"
#include "ntklab/datagen.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace ntklab;
using testutil::cfg3;
using testutil::rel_frobenius;
using testutil::to_dense;

namespace {

struct Case {
  NetConfig cfg;
  std::size_t N;
  std::uint64_t seed;
};

// Small smooth configurations with at most 500 parameters.
std::vector<Case> small_cases() {
  std::vector<Case> out;
  const Activation acts[] = {Activation::sigmoid, Activation::tanh, Activation::softplus};
  std::uint64_t seed = 40;
  for (const auto& widths : std::vector<std::vector<std::size_t>>{
           {3, 5}, {4, 6, 5}, {6, 6, 6}, {3, 4, 6, 5}, {5, 8, 7, 6}, {2, 3}, {4, 3, 5, 4}}) {
    for (Activation a : acts) {
      NetConfig c;
      c.widths = widths;
      c.activation = a;
      out.push_back({c, 2 + seed % 4, seed});
      ++seed;
    }
  }
  return out;
}

Mat data_for(const Case& c) {
  return sample({DataKind::gaussian, c.cfg.widths[0]}, c.N, c.seed + 1000).X;
}

}  // namespace

TEST(Backprop, IdentityActivationRowsAreWeightProducts) {
  NetConfig c = cfg3(3, 4, 5, Activation::identity);
  c.allow_nonsmooth = true;
  const Params p = init_standard(c, 1);
  const Mat X = sample({DataKind::gaussian, 3}, 4, 2).X;
  const std::vector<Mat> B = backprop_rows(p, X);
  const Mat w2w3 = matmul(p.weights[1], p.weights[2]);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(B[3](i, 0), 1.0);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(B[2](i, j), p.weights[2](j, 0), 1e-15);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(B[1](i, j), w2w3(j, 0), 1e-14);
  }
}

TEST(Backprop, TwoLayerRowIsDerivativeTimesLastWeights) {
  NetConfig c;
  c.widths = {3, 5};
  const Params p = init_standard(c, 3);
  const Mat X = sample({DataKind::gaussian, 3}, 4, 4).X;
  const BatchTrace tr = forward_batch(p, X);
  const std::vector<Mat> B = backprop_rows(p, tr);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      EXPECT_EQ(B[1](i, j), tr.dphi[1](i, j) * p.weights[1](j, 0));
}

TEST(Backprop, MatchesRecursionOracle) {
  const Params p = init_standard(cfg3(4, 6, 5), 7);
  const Mat X = sample({DataKind::gaussian, 4}, 3, 8).X;
  const std::vector<Mat> B = backprop_rows(p, X);
  const oracle::Net net = testutil::to_oracle(p);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::vector<oracle::Vec> b =
        oracle::backprop(net, oracle::Vec(X.row(i).begin(), X.row(i).end()));
    for (std::size_t k = 1; k <= 3; ++k)
      for (std::size_t j = 0; j < b[k].size(); ++j) EXPECT_NEAR(B[k](i, j), b[k][j], 1e-12);
  }
}

TEST(Jacobian, LastBlockIsPenultimateFeatures) {
  const Params p = init_standard(cfg3(4, 6, 5), 9);
  const JacobianBundle b = assemble_jacobian(p, sample({DataKind::gaussian, 4}, 5, 10).X);
  EXPECT_EQ(b.blocks[3], b.F[2]);
  EXPECT_EQ(b.J.cols(), p.parameter_count());
  EXPECT_EQ(b.K.rows(), 5u);
  for (std::size_t l = 1; l <= 3; ++l) EXPECT_EQ(b.blocks[l], khatri_rao(b.F[l - 1], b.B[l]));
}

TEST(Jacobian, ZeroWeightsSigmoid) {
  const Params p = init_zeros(cfg3(3, 4, 6));
  const JacobianBundle b = assemble_jacobian(p, sample({DataKind::gaussian, 3}, 4, 11).X);
  for (std::size_t l = 1; l <= 2; ++l)
    for (double v : b.F[l].data()) EXPECT_EQ(v, 0.5);
  for (double v : b.K.data()) EXPECT_NEAR(v, 0.25 * 6, 1e-15);
}

TEST(Jacobian, FiniteDifferenceOracleSeed11) {
  const Params p = init_standard(cfg3(6, 6, 6), 11);
  const Mat X = sample({DataKind::gaussian, 6}, 4, 12).X;
  const JacobianBundle b = assemble_jacobian(p, X);
  const oracle::Dense fd = oracle::fd_jacobian(testutil::to_oracle(p), to_dense(X));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < b.J.cols(); ++k)
      ASSERT_LE(std::abs(b.J(i, k) - fd[i][k]), 1e-5 * (1 + std::abs(fd[i][k]))) << i << "," << k;
}

TEST(Jacobian, FiniteDifferenceOracleAllSmallConfigs) {
  for (const Case& c : small_cases()) {
    const Params p = init_standard(c.cfg, c.seed);
    ASSERT_LE(p.parameter_count(), 500u);
    const Mat X = data_for(c);
    const JacobianBundle b = assemble_jacobian(p, X);
    const oracle::Dense fd = oracle::fd_jacobian(testutil::to_oracle(p), to_dense(X));
    const Mat lib_fd = finite_difference_jacobian(p, X);
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t k = 0; k < b.J.cols(); ++k) {
        ASSERT_LE(std::abs(b.J(i, k) - fd[i][k]), 1e-5 * (1 + std::abs(fd[i][k])));
        ASSERT_LE(std::abs(lib_fd(i, k) - fd[i][k]), 1e-8 * (1 + std::abs(fd[i][k])));
      }
  }
}

TEST(Jacobian, CapacityGuard) {
  NetConfig c = cfg3(512, 1024, 2048);
  const Params p = init_zeros(c);
  const Mat X(200, 512);
  EXPECT_THROW(assemble_jacobian(p, X), CapacityError);
  JacobianOptions factors_only;
  factors_only.materialize = false;
  factors_only.kernel = false;
  EXPECT_NO_THROW(assemble_jacobian(p, Mat(2, 512), factors_only));
}

TEST(Layerwise, DecompositionMatchesJJt) {
  for (const Case& c : small_cases()) {
    const JacobianBundle b = assemble_jacobian(init_standard(c.cfg, c.seed), data_for(c));
    EXPECT_LE(rel_frobenius(ntk_layerwise(b), b.K), 1e-9);
    const Mat jj = gram(b.J);
    EXPECT_LE(rel_frobenius(jj, b.K), 1e-12);
  }
}

TEST(Layerwise, EachBlockPsdAndChainHolds) {
  for (const Case& c : small_cases()) {
    const JacobianBundle b = assemble_jacobian(init_standard(c.cfg, c.seed), data_for(c));
    const std::size_t L = c.cfg.depth();
    for (std::size_t l = 1; l <= L; ++l) {
      const Mat kb = kernel_block(b, l);
      const double scale = 1.0 + lambda_max(kb);
      EXPECT_GE(lambda_min(kb), -1e-9 * scale);
      EXPECT_LE(rel_frobenius(kernel_block_direct(b, l), kb), 1e-10);
    }
    const Mat kl2 = kernel_block(b, L - 1);
    EXPECT_GE(lambda_min(subtract(b.K, kl2)), -1e-9 * (1 + lambda_max(b.K)));
    EXPECT_GE(lambda_min(b.K), lambda_min(kl2) - 1e-9 * (1 + lambda_max(b.K)));
  }
}

TEST(KernelBlock, LastBlockAndDuplicateInputs) {
  const Params p = init_standard(cfg3(4, 6, 5, Activation::tanh), 13);
  Mat X = sample({DataKind::gaussian, 4}, 2, 14).X;
  const JacobianBundle b = assemble_jacobian(p, X);
  EXPECT_LE(rel_frobenius(kernel_block(b, 3), gram(b.F[2])), 1e-15);
  for (std::size_t j = 0; j < 4; ++j) X(1, j) = X(0, j);
  const JacobianBundle d = assemble_jacobian(p, X);
  for (std::size_t l = 1; l <= 3; ++l) {
    const Mat k = kernel_block(d, l);
    EXPECT_NEAR(k(0, 0) * k(1, 1) - k(0, 1) * k(1, 0), 0.0, 1e-12 * (1 + k(0, 0) * k(1, 1)));
  }
}

TEST(TransposeApply, MatchesDenseJt) {
  for (const Case& c : small_cases()) {
    const JacobianBundle b = assemble_jacobian(init_standard(c.cfg, c.seed), data_for(c));
    CounterRng rng(c.seed);
    Vec r(b.samples());
    for (double& v : r) v = rng.normal();
    const Vec a = jacobian_transpose_apply(b, r);
    const Vec want = matvec_transposed(b.J, r);
    ASSERT_EQ(a.size(), want.size());
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], want[k], 1e-12 * (1 + std::abs(want[k])));
  }
}

TEST(UpperBound, SingleSampleAndRandomBundles) {
  const Params p = init_standard(cfg3(4, 6, 5), 15);
  const UpperBoundCheck one = upper_bound_check(assemble_jacobian(p, Mat{{1, 2, 3, 4}}));
  EXPECT_NEAR(one.lambda_min, one.k11, 1e-12 * one.k11);
  EXPECT_TRUE(one.holds);
  for (const Case& c : small_cases())
    EXPECT_TRUE(upper_bound_check(assemble_jacobian(init_standard(c.cfg, c.seed), data_for(c))).holds);
}

TEST(UpperBound, DiagonalScalesWithDTimesWidth) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Params p = init_standard(cfg3(16, 16, 16), 500 + s);
    const UpperBoundCheck u =
        upper_bound_check(assemble_jacobian(p, sample({DataKind::gaussian, 16}, 32, 600 + s).X));
    const double r = u.k11 / (16.0 * 16.0);
    EXPECT_GE(r, 0.01);
    EXPECT_LE(r, 10.0);
  }
}

TEST(Export, MatrixCsv) {
  std::ostringstream out;
  write_matrix_csv(Mat{{1, 2}, {3, 4.5}}, out);
  EXPECT_EQ(out.str(), "c0,c1\n1,2\n3,4.5\n");
}
