#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ntklab/csv.hpp"
#include "ntklab/datagen.hpp"
#include "ntklab/network.hpp"
#include "ntklab/training.hpp"

namespace ntklab {

inline constexpr std::string_view kVersion = "0.1.0";

enum class Command { scaling, phase, concentration, centering, training, memorize, jacobian_check };

Command parse_command(std::string_view name);
std::string to_string(Command c);

/// Sweep axes. Every (N, d, widths, gamma) combination is one sweep point.
/// When `widths` is empty the hidden widths are all equal to d.
struct Sweep {
  std::vector<std::size_t> d;
  std::vector<std::size_t> N;
  std::vector<std::vector<std::size_t>> widths;
  std::size_t depth = 3;
  std::vector<double> gamma{16.0};
  Activation activation = Activation::sigmoid;
  DataKind data = DataKind::gaussian;
  Optimizer optimizer = Optimizer::gd;
  std::optional<double> eta;
  std::size_t T = 2000;
  /// Samples for mean estimation; 0 selects max(1000, 20 N).
  std::size_t M = 0;
  double eps = 1e-2;
  double target_ratio = 1e-3;
};

struct ExperimentConfig {
  std::string name;
  Sweep sweep;
  std::size_t trials = 10;
  std::uint64_t master_seed = 0;
  std::string output;
  bool allow_nonsmooth = false;
};

/// Default sweep for each subcommand.
ExperimentConfig default_config(Command c);

/// Reads a JSON object over default_config(c); unknown keys or bad values throw
/// ConfigError naming the field. force_nonsmooth acts as if the document set
/// allow_nonsmooth, and is applied before validation.
ExperimentConfig parse_config(std::string_view json_text, Command c, bool force_nonsmooth = false);
std::string config_json(const ExperimentConfig& cfg);

/// Builds the network shape for one sweep point and validates it.
NetConfig point_network(const ExperimentConfig& cfg, std::size_t d,
                        const std::vector<std::size_t>& hidden);

struct SweepPoint {
  std::size_t index = 0;
  std::size_t N = 0;
  std::size_t d = 0;
  std::vector<std::size_t> hidden;
  double gamma = 0.0;
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg);

/// Child seed of (point, trial), truncated to 32 bits so it fits any CSV reader.
std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t point, std::size_t trial);

/// Least-squares slope of log y against log x.
double loglog_slope(std::span<const double> x, std::span<const double> y);

CsvTable run_scaling(const ExperimentConfig& cfg);
CsvTable run_phase_transition(const ExperimentConfig& cfg);
CsvTable run_concentration_suite(const ExperimentConfig& cfg);
CsvTable run_centering_suite(const ExperimentConfig& cfg);
CsvTable run_training_suite(const ExperimentConfig& cfg);
CsvTable run_memorize(const ExperimentConfig& cfg);
CsvTable run_jacobian_check(const ExperimentConfig& cfg);

CsvTable run(Command c, const ExperimentConfig& cfg);

}  // namespace ntklab
