#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "ntklab/linalg.hpp"

namespace ntklab {

enum class DataKind { gaussian, sphere, hypercube };

DataKind parse_data_kind(std::string_view name);
std::string to_string(DataKind kind);

/// Input distribution. Sphere samples live on the radius-sqrt(d) sphere so all
/// three kinds share the same sqrt(d) norm scale.
struct DataSpec {
  DataKind kind = DataKind::gaussian;
  std::size_t d = 1;
};

struct Dataset {
  Mat X;  // N x d
  DataSpec spec;
  std::uint64_t seed = 0;

  std::size_t size() const { return X.rows(); }
};

/// N i.i.d. rows. Row i is drawn from its own child stream of `seed`, so the
/// first M rows of a larger sample coincide with a sample of size M.
Dataset sample(const DataSpec& spec, std::size_t n, std::uint64_t seed);

/// Draws a single point from stream index `index` of `seed`.
Vec sample_point(const DataSpec& spec, std::uint64_t seed, std::uint64_t index);

struct ScalingStats {
  double mean_norm = 0.0;
  double mean_sq_norm = 0.0;
  /// Mean squared distance to the empirical mean vector.
  double centered_sq_norm = 0.0;
};

ScalingStats scaling_stats(const Dataset& ds);

/// Largest fraction, over `n_directions` random unit vectors u, of samples
/// whose 1-Lipschitz projection <u, x> deviates from its empirical mean by
/// more than `threshold`.
double lipschitz_probe(const Dataset& ds, std::size_t n_directions, std::uint64_t seed,
                       double threshold = 3.0);

/// CSV with header x0,...,x{d-1}, one row per sample.
void write_csv(const Dataset& ds, std::ostream& out);

}  // namespace ntklab
