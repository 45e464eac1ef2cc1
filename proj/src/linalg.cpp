#include "ntklab/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "ntklab/errors.hpp"

namespace ntklab {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("Mat: " + std::to_string(data_.size()) + " entries for a " +
                         std::to_string(rows) + "x" + std::to_string(cols) + " matrix");
  }
  if (!all_finite()) throw std::invalid_argument("Mat: non-finite entry");
}

Mat::Mat(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Mat: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  if (!all_finite()) throw std::invalid_argument("Mat: non-finite entry");
}

Mat Mat::identity(std::size_t n) {
  Mat m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Mat Mat::column(std::span<const double> v) {
  return Mat(v.size(), 1, std::vector<double>(v.begin(), v.end()));
}

Mat Mat::row_vector(std::span<const double> v) {
  return Mat(1, v.size(), std::vector<double>(v.begin(), v.end()));
}

bool Mat::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Mat add(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "add");
  Mat c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] += bd[k];
  return c;
}

Mat subtract(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "subtract");
  Mat c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] -= bd[k];
  return c;
}

Mat scaled(const Mat& a, double s) {
  Mat c = a;
  for (double& v : c.data()) v *= s;
  return c;
}

Mat hcat(std::span<const Mat> blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const Mat& b : blocks) {
    if (b.rows() != rows) throw DimensionError("hcat: row count mismatch");
    cols += b.cols();
  }
  Mat out(rows, cols);
  std::size_t offset = 0;
  for (const Mat& b : blocks) {
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(b.row(i).begin(), b.row(i).end(), out.row(i).begin() + offset);
    offset += b.cols();
  }
  return out;
}

Mat symmetrize(const Mat& s) {
  if (!s.is_square()) throw DimensionError("symmetrize: non-square matrix");
  Mat out(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) out(i, j) = 0.5 * (s(i, j) + s(j, i));
  return out;
}

double frobenius_norm(const Mat& a) { return norm2(a.data()); }

double max_abs(const Mat& a) {
  double m = 0.0;
  for (double v : a.data()) m = std::max(m, std::abs(v));
  return m;
}

double trace(const Mat& a) {
  if (!a.is_square()) throw DimensionError("trace: non-square matrix");
  double t = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) t += a(i, i);
  return t;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm2(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

Vec matvec(const Mat& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionError("matvec: length mismatch");
  Vec y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Vec matvec_transposed(const Mat& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw DimensionError("matvec_transposed: length mismatch");
  Vec y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * xi;
  }
  return y;
}

// ---------------------------------------------------------------------------
// Kernels: the serial references and their OpenMP counterparts share the
// per-element loop bodies below.

namespace {

inline void matmul_row(const Mat& a, const Mat& b, Mat& c, std::size_t i) {
  auto ci = c.row(i);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    if (aik == 0.0) continue;
    auto bk = b.row(k);
    for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
  }
}

inline void gram_row(const Mat& a, Mat& g, std::size_t i) {
  for (std::size_t j = i; j < a.rows(); ++j) {
    const double v = dot(a.row(i), a.row(j));
    g(i, j) = v;
    g(j, i) = v;
  }
}

inline void khatri_rao_row(const Mat& a, const Mat& b, Mat& c, std::size_t i) {
  auto ai = a.row(i);
  auto bi = b.row(i);
  auto ci = c.row(i);
  const std::size_t q = b.cols();
  for (std::size_t p = 0; p < ai.size(); ++p)
    for (std::size_t r = 0; r < q; ++r) ci[p * q + r] = ai[p] * bi[r];
}

void check_matmul(const Mat& a, const Mat& b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " +
                         std::to_string(b.rows()));
}

void check_khatri_rao(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows())
    throw DimensionError("khatri_rao: row counts " + std::to_string(a.rows()) + " and " +
                         std::to_string(b.rows()));
}

}  // namespace

namespace serial {

Mat matmul(const Mat& a, const Mat& b) {
  check_matmul(a, b);
  Mat c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
  return c;
}

Mat gram(const Mat& a) {
  Mat g(a.rows(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) gram_row(a, g, i);
  return g;
}

Mat khatri_rao(const Mat& a, const Mat& b) {
  check_khatri_rao(a, b);
  Mat c(a.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) khatri_rao_row(a, b, c, i);
  return c;
}

}  // namespace serial

Mat matmul(const Mat& a, const Mat& b) {
  check_matmul(a, b);
  Mat c(a.rows(), b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (n * a.cols() * b.cols() > 32768)
  for (std::ptrdiff_t i = 0; i < n; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Mat gram(const Mat& a) {
  Mat g(a.rows(), a.rows());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(dynamic, 4) if (n * n * a.cols() > 32768)
  for (std::ptrdiff_t i = 0; i < n; ++i) gram_row(a, g, static_cast<std::size_t>(i));
  return g;
}

Mat khatri_rao(const Mat& a, const Mat& b) {
  check_khatri_rao(a, b);
  Mat c(a.rows(), a.cols() * b.cols());
  const auto n = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static) if (c.size() > 65536)
  for (std::ptrdiff_t i = 0; i < n; ++i) khatri_rao_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Mat hadamard(const Mat& a, const Mat& b) {
  require_same_shape(a, b, "hadamard");
  Mat c = a;
  auto cd = c.data();
  auto bd = b.data();
  for (std::size_t k = 0; k < cd.size(); ++k) cd[k] *= bd[k];
  return c;
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues.

namespace {

// Householder reduction to tridiagonal form (eigenvalues only). On return
// d holds the diagonal and e the sub-diagonal in e[1..n-1].
void tridiagonalize(Mat& a, Vec& d, Vec& e) {
  const std::size_t n = a.rows();
  d.assign(n, 0.0);
  e.assign(n, 0.0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
      if (scale == 0.0) {
        e[i] = a(i, l);
      } else {
        for (std::size_t k = 0; k <= l; ++k) {
          a(i, k) /= scale;
          h += a(i, k) * a(i, k);
        }
        double f = a(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        a(i, l) = f - g;
        f = 0.0;
        for (std::size_t j = 0; j <= l; ++j) {
          g = 0.0;
          for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
          for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
          e[j] = g / h;
          f += e[j] * a(i, j);
        }
        const double hh = f / (h + h);
        for (std::size_t j = 0; j <= l; ++j) {
          f = a(i, j);
          g = e[j] - hh * f;
          e[j] = g;
          for (std::size_t k = 0; k <= j; ++k) a(j, k) -= (f * e[k] + g * a(i, k));
        }
      }
    } else {
      e[i] = a(i, l);
    }
  }
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);
}

// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix.
void tridiagonal_ql(Vec& d, Vec& e) {
  const std::size_t n = d.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  constexpr int kMaxSweeps = 60;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == kMaxSweeps) {
          auto [lo, hi] = std::minmax_element(d.begin(), d.end());
          throw ConvergenceError("tridiagonal QL did not converge", *lo, *hi);
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0;
        double c = 1.0;
        double p = 0.0;
        bool deflated = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            deflated = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
        }
        if (deflated) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
}

double gershgorin_lower(const Mat& s) {
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.rows(); ++i) {
    double radius = 0.0;
    for (std::size_t j = 0; j < s.cols(); ++j)
      if (j != i) radius += std::abs(s(i, j));
    lo = std::min(lo, s(i, i) - radius);
  }
  return lo;
}

Vec start_vector(std::size_t n) {
  Vec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
  const double nx = norm2(x);
  for (double& v : x) v /= nx;
  return x;
}

Mat shifted(const Mat& s, double sigma) {
  Mat out = s;
  for (std::size_t i = 0; i < s.rows(); ++i) out(i, i) -= sigma;
  return out;
}

// Largest eigenvalue by power iteration on S - lo*I, which is PSD.
double power_top(const Mat& s, double lo, const EigOptions& opts, std::size_t& iters) {
  const std::size_t n = s.rows();
  const double shift = std::min(lo, 0.0);
  Vec x = start_vector(n);
  double rq = 0.0;
  for (iters = 0; iters < opts.max_iterations; ++iters) {
    Vec y = matvec(s, x);
    rq = dot(x, y);
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) res2 += (y[i] - rq * x[i]) * (y[i] - rq * x[i]);
    if (std::sqrt(res2) <= opts.tol * (1.0 + std::abs(rq))) return rq;
    for (std::size_t i = 0; i < n; ++i) y[i] -= shift * x[i];
    const double ny = norm2(y);
    if (ny == 0.0) return rq;
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
  }
  throw ConvergenceError("power iteration did not converge", lo, rq);
}

// Smallest eigenvalue by inverse iteration. Every shift is certified to lie
// below the spectrum by a successful Cholesky factorization of S - sigma*I.
double inverse_bottom(const Mat& s, double lo, const EigOptions& opts, std::size_t& iters) {
  const std::size_t n = s.rows();
  double sigma = lo - 1e-3 * (1.0 + std::abs(lo));
  Mat chol;
  if (!cholesky(shifted(s, sigma), chol)) {
    throw ConvergenceError("inverse iteration: Gershgorin shift not below spectrum", lo, lo);
  }
  Vec x = start_vector(n);
  double rq = lo;
  for (iters = 0; iters < opts.max_iterations; ++iters) {
    Vec y = cholesky_solve(chol, x);
    const double ny = norm2(y);
    for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
    Vec sx = matvec(s, x);
    rq = dot(x, sx);
    double res2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) res2 += (sx[i] - rq * x[i]) * (sx[i] - rq * x[i]);
    const double res = std::sqrt(res2);
    const double slack = opts.tol * (1.0 + std::abs(rq));
    if (res <= slack) return rq;
    // Try to move the shift up toward the bracket [rq - res, rq].
    double candidate = rq - res - slack;
    for (int attempt = 0; attempt < 3 && candidate > sigma; ++attempt) {
      Mat trial;
      if (cholesky(shifted(s, candidate), trial)) {
        sigma = candidate;
        chol = std::move(trial);
        break;
      }
      candidate = 0.5 * (candidate + sigma);
    }
  }
  throw ConvergenceError("inverse iteration did not converge", rq, rq);
}

}  // namespace

Vec sym_eigenvalues(const Mat& s) {
  if (!s.is_square()) throw DimensionError("sym_eigenvalues: non-square matrix");
  if (s.rows() == 0) return {};
  Mat a = symmetrize(s);
  Vec d;
  Vec e;
  tridiagonalize(a, d, e);
  tridiagonal_ql(d, e);
  std::sort(d.begin(), d.end());
  return d;
}

SpectrumReport sym_eig_extremes(const Mat& s, const EigOptions& opts) {
  if (!s.is_square()) throw DimensionError("sym_eig_extremes: non-square matrix");
  if (s.rows() == 0) throw DimensionError("sym_eig_extremes: empty matrix");
  SpectrumReport rep;
  rep.tol = opts.tol;
  if (s.rows() <= opts.dense_limit) {
    const Vec ev = sym_eigenvalues(s);
    rep.lambda_min = ev.front();
    rep.lambda_max = ev.back();
    rep.method = EigMethod::dense;
    return rep;
  }
  const Mat sym = symmetrize(s);
  const double lo = gershgorin_lower(sym);
  std::size_t it_top = 0;
  std::size_t it_bottom = 0;
  rep.lambda_max = power_top(sym, lo, opts, it_top);
  rep.lambda_min = inverse_bottom(sym, lo, opts, it_bottom);
  rep.lambda_min = std::min(rep.lambda_min, rep.lambda_max);
  rep.method = EigMethod::inverse_power;
  rep.iterations = it_top + it_bottom;
  return rep;
}

double lambda_min(const Mat& s) { return sym_eig_extremes(s).lambda_min; }
double lambda_max(const Mat& s) { return sym_eig_extremes(s).lambda_max; }

double op_norm(const Mat& m) {
  if (m.empty()) return 0.0;
  const Mat g = m.rows() <= m.cols() ? gram(m) : gram(transpose(m));
  return std::sqrt(std::max(0.0, lambda_max(g)));
}

double min_singular(const Mat& m) {
  if (m.empty()) return 0.0;
  const Mat g = m.rows() <= m.cols() ? gram(m) : gram(transpose(m));
  return std::sqrt(std::max(0.0, lambda_min(g)));
}

bool cholesky(const Mat& s, Mat& lower) {
  if (!s.is_square()) throw DimensionError("cholesky: non-square matrix");
  const std::size_t n = s.rows();
  lower = Mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = s(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower(j, k) * lower(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) return false;
    const double ljj = std::sqrt(diag);
    lower(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = s(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= lower(i, k) * lower(j, k);
      lower(i, j) = v / ljj;
    }
  }
  return true;
}

Vec cholesky_solve(const Mat& lower, std::span<const double> b) {
  const std::size_t n = lower.rows();
  if (b.size() != n) throw DimensionError("cholesky_solve: length mismatch");
  Vec z(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) z[i] -= lower(i, k) * z[k];
    z[i] /= lower(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) z[i] -= lower(k, i) * z[k];
    z[i] /= lower(i, i);
  }
  return z;
}

Vec least_norm_solve(const Mat& j, std::span<const double> y, double ridge) {
  if (j.rows() != y.size()) throw DimensionError("least_norm_solve: y length != rows of J");
  if (j.rows() > j.cols()) throw DimensionError("least_norm_solve: more rows than columns");
  if (ridge < 0.0) throw std::invalid_argument("least_norm_solve: negative ridge");
  Mat g = gram(j);
  double max_diag = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) {
    g(i, i) += ridge;
    max_diag = std::max(max_diag, g(i, i));
  }
  Mat chol;
  bool ok = cholesky(g, chol);
  if (ok && ridge == 0.0) {
    // Pivots this small relative to the diagonal mean the rows are dependent
    // to working precision.
    for (std::size_t i = 0; i < chol.rows(); ++i) {
      if (chol(i, i) * chol(i, i) <= 1e-14 * max_diag) {
        ok = false;
        break;
      }
    }
  }
  if (!ok) throw SingularSystemError("least_norm_solve: J J^T + ridge I is singular");

  Vec z = cholesky_solve(chol, y);
  Vec theta = matvec_transposed(j, z);
  // One refinement step on the normal equations.
  Vec jt = matvec(j, theta);
  Vec r(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - jt[i] - ridge * z[i];
  Vec dz = cholesky_solve(chol, r);
  Vec dtheta = matvec_transposed(j, dz);
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] += dtheta[k];
  return theta;
}

}  // namespace ntklab
