#include "ntklab/datagen.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "ntklab/csv.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

DataKind parse_data_kind(std::string_view name) {
  if (name == "gaussian") return DataKind::gaussian;
  if (name == "sphere") return DataKind::sphere;
  if (name == "hypercube") return DataKind::hypercube;
  throw ConfigError("data", "unknown data kind '" + std::string(name) + "'");
}

std::string to_string(DataKind kind) {
  switch (kind) {
    case DataKind::gaussian: return "gaussian";
    case DataKind::sphere: return "sphere";
    case DataKind::hypercube: return "hypercube";
  }
  return "unknown";
}

namespace {

void fill_point(const DataSpec& spec, std::uint64_t seed, std::uint64_t index,
                std::span<double> out) {
  CounterRng rng(derive_seed(seed, "row", index));
  switch (spec.kind) {
    case DataKind::gaussian:
      for (double& v : out) v = rng.normal();
      break;
    case DataKind::sphere: {
      double nrm = 0.0;
      do {
        for (double& v : out) v = rng.normal();
        nrm = norm2(out);
      } while (nrm == 0.0);
      const double scale = std::sqrt(static_cast<double>(spec.d)) / nrm;
      for (double& v : out) v *= scale;
      break;
    }
    case DataKind::hypercube:
      for (double& v : out) v = rng.rademacher();
      break;
  }
}

}  // namespace

Vec sample_point(const DataSpec& spec, std::uint64_t seed, std::uint64_t index) {
  if (spec.d < 1) throw ConfigError("d", "dimension must be at least 1");
  Vec x(spec.d);
  fill_point(spec, seed, index, x);
  return x;
}

Dataset sample(const DataSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.d < 1) throw ConfigError("d", "dimension must be at least 1");
  if (n < 1) throw ConfigError("N", "sample count must be at least 1");
  Dataset ds{Mat(n, spec.d), spec, seed};
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * spec.d > 65536)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto row = static_cast<std::size_t>(i);
    fill_point(spec, seed, row, ds.X.row(row));
  }
  return ds;
}

ScalingStats scaling_stats(const Dataset& ds) {
  const std::size_t n = ds.X.rows();
  const std::size_t d = ds.X.cols();
  if (n < 2) throw std::invalid_argument("scaling_stats: need at least two samples");
  ScalingStats st;
  Vec mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = ds.X.row(i);
    const double sq = dot(r, r);
    st.mean_norm += std::sqrt(sq);
    st.mean_sq_norm += sq;
    for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  st.mean_norm *= inv_n;
  st.mean_sq_norm *= inv_n;
  for (double& m : mean) m *= inv_n;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = ds.X.row(i);
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) sq += (r[j] - mean[j]) * (r[j] - mean[j]);
    st.centered_sq_norm += sq;
  }
  st.centered_sq_norm *= inv_n;
  return st;
}

double lipschitz_probe(const Dataset& ds, std::size_t n_directions, std::uint64_t seed,
                       double threshold) {
  const std::size_t n = ds.X.rows();
  const std::size_t d = ds.X.cols();
  double worst = 0.0;
  for (std::size_t k = 0; k < n_directions; ++k) {
    CounterRng rng(derive_seed(seed, "direction", k));
    Vec u(d);
    for (double& v : u) v = rng.normal();
    const double nu = norm2(u);
    for (double& v : u) v /= nu;
    Vec proj = matvec(ds.X, u);
    double mean = 0.0;
    for (double p : proj) mean += p;
    mean /= static_cast<double>(n);
    std::size_t exceed = 0;
    for (double p : proj)
      if (std::abs(p - mean) > threshold) ++exceed;
    worst = std::max(worst, static_cast<double>(exceed) / static_cast<double>(n));
  }
  return worst;
}

void write_csv(const Dataset& ds, std::ostream& out) {
  for (std::size_t j = 0; j < ds.X.cols(); ++j) out << (j ? "," : "") << "x" << j;
  out << '\n';
  for (std::size_t i = 0; i < ds.X.rows(); ++i) {
    auto r = ds.X.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << format_number(r[j]);
    out << '\n';
  }
}

}  // namespace ntklab
