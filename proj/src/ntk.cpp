#include "ntklab/ntk.hpp"

#include <ostream>
#include <string>

#include "ntklab/csv.hpp"
#include "ntklab/errors.hpp"

namespace ntklab {

std::vector<Mat> backprop_rows(const Params& p, const BatchTrace& tr) {
  const std::size_t L = p.depth();
  const std::size_t n = tr.F.front().rows();
  std::vector<Mat> B(L + 1);
  B[L] = Mat(n, 1, 1.0);
  for (std::size_t k = L - 1; k >= 1; --k) {
    // (B_{k+1} W_{k+1}^T)_{i:} = W_{k+1} (B_{k+1})_{i:}
    Mat back = matmul(B[k + 1], transpose(p.weights[k]));
    B[k] = hadamard(tr.dphi[k], back);
  }
  return B;
}

std::vector<Mat> backprop_rows(const Params& p, const Mat& X) {
  return backprop_rows(p, forward_batch(p, X));
}

JacobianBundle assemble_jacobian(const Params& p, const Mat& X, const JacobianOptions& opts) {
  const std::size_t total = X.rows() * p.parameter_count();
  if (opts.materialize && total > kJacobianEntryLimit)
    throw CapacityError("assemble_jacobian: N * P = " + std::to_string(total) +
                        " exceeds the dense Jacobian limit");
  BatchTrace tr = forward_batch(p, X);
  JacobianBundle b;
  b.B = backprop_rows(p, tr);
  b.F = std::move(tr.F);
  b.out = std::move(tr.out);
  const std::size_t L = p.depth();
  if (!opts.materialize) return b;
  b.blocks.resize(L + 1);
  for (std::size_t l = 1; l <= L; ++l) b.blocks[l] = khatri_rao(b.F[l - 1], b.B[l]);
  b.J = hcat(std::span<const Mat>(b.blocks).subspan(1));
  if (opts.kernel) b.K = symmetrize(gram(b.J));
  return b;
}

Vec jacobian_transpose_apply(const JacobianBundle& b, std::span<const double> r) {
  const std::size_t L = b.depth();
  const std::size_t n = b.samples();
  if (r.size() != n) throw DimensionError("jacobian_transpose_apply: residual length mismatch");
  Vec g;
  for (std::size_t l = 1; l <= L; ++l) {
    const Mat& F = b.F[l - 1];
    const Mat& B = b.B[l];
    Mat rb(n, B.cols());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < B.cols(); ++j) rb(i, j) = r[i] * B(i, j);
    const Mat gl = matmul(transpose(F), rb);
    g.insert(g.end(), gl.data().begin(), gl.data().end());
  }
  return g;
}

Mat kernel_block(const JacobianBundle& b, std::size_t l) {
  if (l < 1 || l > b.depth()) throw std::invalid_argument("kernel_block: layer out of range");
  return hadamard(gram(b.F[l - 1]), gram(b.B[l]));
}

Mat kernel_block_direct(const JacobianBundle& b, std::size_t l) {
  if (l < 1 || l > b.depth()) throw std::invalid_argument("kernel_block_direct: layer out of range");
  if (b.blocks.size() > l && !b.blocks[l].empty()) return gram(b.blocks[l]);
  return gram(khatri_rao(b.F[l - 1], b.B[l]));
}

Mat ntk_layerwise(const JacobianBundle& b) {
  Mat sum = kernel_block(b, 1);
  for (std::size_t l = 2; l <= b.depth(); ++l) sum = add(sum, kernel_block(b, l));
  return sum;
}

UpperBoundCheck upper_bound_check(const JacobianBundle& b) {
  const Mat K = b.K.empty() ? ntk_layerwise(b) : b.K;
  UpperBoundCheck c;
  c.lambda_min = lambda_min(K);
  c.k11 = K(0, 0);
  c.holds = c.lambda_min <= c.k11 + 1e-9;
  return c;
}

Mat finite_difference_jacobian(const Params& p, const Mat& X, double step) {
  const Vec theta = p.flatten();
  const std::size_t P = theta.size();
  Mat J(X.rows(), P);
  for (std::size_t k = 0; k < P; ++k) {
    Vec up = theta;
    Vec down = theta;
    up[k] += step;
    down[k] -= step;
    const Vec fu = predict(with_parameters(p, up), X);
    const Vec fd = predict(with_parameters(p, down), X);
    for (std::size_t i = 0; i < X.rows(); ++i) J(i, k) = (fu[i] - fd[i]) / (2.0 * step);
  }
  return J;
}

void write_matrix_csv(const Mat& m, std::ostream& out) {
  for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << 'c' << j;
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_number(r[j]);
    out << '\n';
  }
}

}  // namespace ntklab
