#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ntklab {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `entries`; throws DimensionError on a length mismatch
  /// and std::invalid_argument on a non-finite entry.
  Mat(std::size_t rows, std::size_t cols, std::vector<double> entries);
  Mat(std::initializer_list<std::initializer_list<double>> rows);

  static Mat identity(std::size_t n);
  static Mat column(std::span<const double> v);
  static Mat row_vector(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  bool is_square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& storage() const { return data_; }

  bool all_finite() const;

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Elementwise and structural helpers.
Mat transpose(const Mat& a);
Mat add(const Mat& a, const Mat& b);
Mat subtract(const Mat& a, const Mat& b);
Mat scaled(const Mat& a, double s);
Mat hcat(std::span<const Mat> blocks);
Mat symmetrize(const Mat& s);
double frobenius_norm(const Mat& a);
double max_abs(const Mat& a);
double trace(const Mat& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);

/// y = A x
Vec matvec(const Mat& a, std::span<const double> x);
/// y = A^T x
Vec matvec_transposed(const Mat& a, std::span<const double> x);

// Parallel kernels. Each output element is produced by exactly one thread
// with the same loop order as the serial reference, so results are bitwise
// identical regardless of the thread count.
Mat matmul(const Mat& a, const Mat& b);
/// A A^T
Mat gram(const Mat& a);
/// Row-wise Kronecker product: row i of the result is A_{i:} (x) B_{i:}.
Mat khatri_rao(const Mat& a, const Mat& b);
Mat hadamard(const Mat& a, const Mat& b);

namespace serial {
Mat matmul(const Mat& a, const Mat& b);
Mat gram(const Mat& a);
Mat khatri_rao(const Mat& a, const Mat& b);
}  // namespace serial

enum class EigMethod { dense, inverse_power };

struct SpectrumReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  EigMethod method = EigMethod::dense;
  double tol = 0.0;
  std::size_t iterations = 0;
};

struct EigOptions {
  double tol = 1e-10;
  /// Above this order the iterative path is used.
  std::size_t dense_limit = 2048;
  std::size_t max_iterations = 20000;
};

/// Extreme eigenvalues of a symmetric matrix. The input is symmetrized as
/// (S + S^T)/2 first. Dense path: Householder tridiagonalization followed by
/// implicit QL. Iterative path: power iteration for the top and shifted
/// inverse iteration (Cholesky-certified shifts) for the bottom.
SpectrumReport sym_eig_extremes(const Mat& s, const EigOptions& opts = {});

/// All eigenvalues in ascending order (dense path only).
Vec sym_eigenvalues(const Mat& s);

double lambda_min(const Mat& s);
double lambda_max(const Mat& s);

/// Largest singular value.
double op_norm(const Mat& m);
/// Smallest singular value, via the smaller of the two Gram matrices.
double min_singular(const Mat& m);

/// Lower-triangular Cholesky factor; returns false when the matrix is not
/// numerically positive definite.
bool cholesky(const Mat& s, Mat& lower);
Vec cholesky_solve(const Mat& lower, std::span<const double> b);

/// theta = J^T (J J^T + ridge I)^{-1} y, with one step of iterative refinement.
Vec least_norm_solve(const Mat& j, std::span<const double> y, double ridge = 0.0);

}  // namespace ntklab
