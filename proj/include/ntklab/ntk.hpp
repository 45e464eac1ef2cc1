#pragma once

#include <iosfwd>
#include <vector>

#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"

namespace ntklab {

/// Dense J is refused above this many entries.
inline constexpr std::size_t kJacobianEntryLimit = std::size_t{1} << 27;

/// F[l] for l = 0..L-1; B[k] for k = 1..L (B[0] empty); blocks[l] for
/// l = 1..L (blocks[0] empty). J and K are left empty when not requested.
struct JacobianBundle {
  std::vector<Mat> F;
  std::vector<Mat> B;
  std::vector<Mat> blocks;
  Mat J;
  Mat K;
  Vec out;

  std::size_t depth() const { return F.size(); }
  std::size_t samples() const { return F.empty() ? 0 : F.front().rows(); }
};

struct JacobianOptions {
  bool materialize = true;  // blocks and J
  bool kernel = true;       // K = J J^T
};

/// B_1..B_L from a batched forward pass: B_L = 1 and
/// B_k = phi'(G_k) o (B_{k+1} W_{k+1}^T).
std::vector<Mat> backprop_rows(const Params& p, const BatchTrace& tr);
std::vector<Mat> backprop_rows(const Params& p, const Mat& X);

JacobianBundle assemble_jacobian(const Params& p, const Mat& X, const JacobianOptions& opts = {});

/// J^T r computed blockwise as F_{l-1}^T diag(r) B_l, so J need not exist.
Vec jacobian_transpose_apply(const JacobianBundle& b, std::span<const double> r);

/// Sum over k of F_k F_k^T o B_{k+1} B_{k+1}^T.
Mat ntk_layerwise(const JacobianBundle& b);

/// K_{l-1} = F_{l-1} F_{l-1}^T o B_l B_l^T for l in [1, L].
Mat kernel_block(const JacobianBundle& b, std::size_t l);
/// Same quantity computed as block_l block_l^T.
Mat kernel_block_direct(const JacobianBundle& b, std::size_t l);

struct UpperBoundCheck {
  double lambda_min = 0.0;
  double k11 = 0.0;
  bool holds = false;
};

UpperBoundCheck upper_bound_check(const JacobianBundle& b);

/// Central differences of the network output with respect to every weight.
Mat finite_difference_jacobian(const Params& p, const Mat& X, double step = 1e-5);

/// Writes a matrix as CSV with header c0..c{n-1}.
void write_matrix_csv(const Mat& m, std::ostream& out);

}  // namespace ntklab
