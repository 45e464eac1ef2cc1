#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>
#include <set>

#include "ntklab/errors.hpp"
#include "ntklab/experiment.hpp"

using namespace ntklab;

namespace {

std::string field_of(const std::string& json, Command c) {
  try {
    parse_config(json, c);
  } catch (const ConfigError& e) {
    return e.field;
  }
  return "<no error>";
}

ExperimentConfig small(Command c, const std::string& json) { return parse_config(json, c); }

}  // namespace

TEST(Commands, NamesRoundTrip) {
  for (Command c : {Command::scaling, Command::phase, Command::concentration, Command::centering,
                    Command::training, Command::memorize, Command::jacobian_check})
    EXPECT_EQ(parse_command(to_string(c)), c);
  EXPECT_EQ(to_string(Command::jacobian_check), "jacobian-check");
  EXPECT_THROW(parse_command("plot"), ConfigError);
}

TEST(Defaults, PerSubcommandSweeps) {
  const ExperimentConfig s = default_config(Command::scaling);
  EXPECT_EQ(s.sweep.d, (std::vector<std::size_t>{8, 12, 16, 24, 32}));
  EXPECT_EQ(s.sweep.N, (std::vector<std::size_t>{16, 32, 64}));
  EXPECT_EQ(s.sweep.activation, Activation::sigmoid);
  EXPECT_EQ(s.trials, 10u);
  const ExperimentConfig p = default_config(Command::phase);
  EXPECT_EQ(p.sweep.depth, 4u);
  EXPECT_EQ(p.sweep.activation, Activation::relu);
  EXPECT_EQ(p.sweep.optimizer, Optimizer::adam);
  EXPECT_TRUE(p.allow_nonsmooth);
  EXPECT_EQ(default_config(Command::training).sweep.gamma, (std::vector<double>{16.0}));
}

TEST(ParseConfig, OverridesAndScalars) {
  const ExperimentConfig c = small(Command::centering, R"({
    "name": "gap", "trials": 3, "master_seed": 77, "output": "out.csv",
    "sweep": {"d": 8, "N": [4, 8], "activation": "softplus", "data": "sphere", "M": 200}
  })");
  EXPECT_EQ(c.name, "gap");
  EXPECT_EQ(c.trials, 3u);
  EXPECT_EQ(c.master_seed, 77u);
  EXPECT_EQ(c.output, "out.csv");
  EXPECT_EQ(c.sweep.d, (std::vector<std::size_t>{8}));
  EXPECT_EQ(c.sweep.N, (std::vector<std::size_t>{4, 8}));
  EXPECT_EQ(c.sweep.activation, Activation::softplus);
  EXPECT_EQ(c.sweep.data, DataKind::sphere);
  EXPECT_EQ(c.sweep.M, 200u);
}

TEST(ParseConfig, ErrorsNameTheField) {
  EXPECT_EQ(field_of("{", Command::scaling), "config");
  EXPECT_EQ(field_of("[1]", Command::scaling), "config");
  EXPECT_EQ(field_of(R"({"bogus": 1})", Command::scaling), "bogus");
  EXPECT_EQ(field_of(R"({"sweep": {"depthh": 3}})", Command::scaling), "sweep.depthh");
  EXPECT_EQ(field_of(R"({"trials": 0})", Command::scaling), "trials");
  EXPECT_EQ(field_of(R"({"sweep": {"d": [0]}})", Command::scaling), "sweep.d");
  EXPECT_EQ(field_of(R"({"sweep": {"activation": "gelu"}})", Command::scaling), "sweep.activation");
  EXPECT_EQ(field_of(R"({"sweep": {"optimizer": "sgd"}})", Command::scaling), "sweep.optimizer");
  EXPECT_EQ(field_of(R"({"sweep": {"data": "mnist"}})", Command::scaling), "sweep.data");
  EXPECT_EQ(field_of(R"({"sweep": {"gamma": [-1]}})", Command::training), "sweep.gamma");
  EXPECT_EQ(field_of(R"({"sweep": {"M": 50}})", Command::centering), "sweep.M");
  EXPECT_EQ(field_of(R"({"sweep": {"eta": 0}})", Command::training), "sweep.eta");
  EXPECT_EQ(field_of(R"({"sweep": {"d": "eight"}})", Command::scaling), "sweep.d");
  // relu without the flag and a non-pyramidal shape are rejected at parse time.
  EXPECT_EQ(field_of(R"({"sweep": {"activation": "relu"}})", Command::scaling), "activation");
  EXPECT_EQ(field_of(R"({"sweep": {"d": [4], "widths": [[16, 4]]}})", Command::training), "widths");
  EXPECT_EQ(field_of(R"({"sweep": {"widths": [[8]]}})", Command::training), "sweep.widths");
}

TEST(ParseConfig, JsonEchoRoundTrips) {
  const ExperimentConfig c = small(Command::training, R"({
    "master_seed": 5, "sweep": {"gamma": [1, 4], "eta": 0.01, "T": 10, "widths": [[16, 8], [8, 8]]}
  })");
  const ExperimentConfig back = parse_config(config_json(c), Command::training);
  EXPECT_EQ(config_json(back), config_json(c));
  EXPECT_EQ(back.sweep.widths.size(), 2u);
  EXPECT_EQ(*back.sweep.eta, 0.01);
}

TEST(Sweep, CartesianPointsInOrder) {
  const ExperimentConfig c = small(Command::training, R"({
    "sweep": {"d": [8, 16], "N": [4, 8, 12], "gamma": [1, 16], "widths": [[8, 4]]}
  })");
  const auto pts = sweep_points(c);
  ASSERT_EQ(pts.size(), 12u);
  EXPECT_EQ(pts[0].N, 4u);
  EXPECT_EQ(pts[0].d, 8u);
  EXPECT_EQ(pts[1].gamma, 16.0);
  EXPECT_EQ(pts[2].d, 16u);
  EXPECT_EQ(pts[4].N, 8u);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].index, i);
}

TEST(Sweep, TrialSeedsAreDistinct32Bit) {
  ExperimentConfig c = default_config(Command::scaling);
  std::set<std::uint64_t> seen;
  for (std::size_t p = 0; p < 15; ++p)
    for (std::size_t t = 0; t < 10; ++t) {
      const std::uint64_t s = trial_seed(c, p, t);
      EXPECT_LT(s, std::uint64_t{1} << 32);
      seen.insert(s);
    }
  EXPECT_EQ(seen.size(), 150u);
  const std::uint64_t before = trial_seed(c, 0, 0);
  c.master_seed = 1;
  EXPECT_NE(trial_seed(c, 0, 0), before);
}

TEST(Slope, ExactPowerLaw) {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 12, 48, 192};
  EXPECT_NEAR(loglog_slope(x, y), 2.0, 1e-12);
  EXPECT_TRUE(std::isnan(loglog_slope(std::vector<double>{1}, std::vector<double>{1})));
}

TEST(Scaling, ColumnsSlopesAndBound) {
  const ExperimentConfig c = small(Command::scaling, R"({"trials": 2, "sweep": {"d": [4, 6, 8], "N": [4]}})");
  const CsvTable t = run_scaling(c);
  EXPECT_EQ(t.row_count(), 6u);
  for (const char* col : {"N", "d", "seed", "lambda_min", "k11", "n1n2"}) EXPECT_NO_THROW(t.column(col));
  for (double v : t.column("upper_bound_holds")) EXPECT_EQ(v, 1.0);
  for (std::size_t i = 0; i < t.row_count(); ++i)
    EXPECT_EQ(t.value(i, "n1n2"), t.value(i, "d") * t.value(i, "d"));
  EXPECT_FALSE(std::isnan(std::stod(t.meta("slope_N4"))));
  EXPECT_EQ(t.meta("command"), "scaling");
  EXPECT_EQ(t.meta("ntklab"), std::string(kVersion));
}

TEST(Scaling, RankStarvedPoint) {
  const CsvTable t = run_scaling(small(Command::scaling, R"({"trials": 2, "sweep": {"d": [4], "N": [200]}})"));
  for (double v : t.column("lambda_min")) EXPECT_LE(v, 1e-6 * 16);
}

TEST(Scaling, ShapeRestrictions) {
  EXPECT_THROW(run_scaling(small(Command::scaling, R"({"sweep": {"depth": 4}})")), ConfigError);
  EXPECT_THROW(run_scaling(small(Command::scaling, R"({"sweep": {"d": [8], "widths": [[8, 8]]}})")),
               ConfigError);
}

TEST(Determinism, ByteIdenticalAndThreadInvariant) {
  const ExperimentConfig c = small(Command::scaling, R"({"trials": 3, "sweep": {"d": [4, 6], "N": [4, 8]}})");
  const std::string a = run_scaling(c).str(true);
  EXPECT_EQ(a, run_scaling(c).str(true));
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const std::string serial = run_scaling(c).str(true);
  omp_set_num_threads(4);
  const std::string parallel = run_scaling(c).str(true);
  omp_set_num_threads(saved);
  EXPECT_EQ(serial, a);
  EXPECT_EQ(parallel, a);
  ExperimentConfig other = c;
  other.master_seed = 9;
  EXPECT_NE(run_scaling(other).str(true), a);
}

TEST(Phase, ZeroStepsAndRegimes) {
  const CsvTable t = run_phase_transition(
      small(Command::phase, R"({"trials": 1, "sweep": {"d": [2, 8], "N": [8, 160], "T": 0}})"));
  ASSERT_EQ(t.row_count(), 4u);
  std::set<std::string> regimes;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    EXPECT_EQ(t.value(i, "final_loss"), t.value(i, "initial_loss"));
    EXPECT_EQ(t.value(i, "steps"), 0.0);
    regimes.insert(std::get<std::string>(t.rows()[i][t.column_index("regime")]));
  }
  EXPECT_TRUE(regimes.count("over"));
  EXPECT_TRUE(regimes.count("under"));
  EXPECT_THROW(run_phase_transition(small(Command::phase, R"({"sweep": {"depth": 3}})")), ConfigError);
}

TEST(Concentration, RowsPerLayerAndSummaries) {
  const CsvTable t = run_concentration_suite(
      small(Command::concentration, R"({"trials": 5, "sweep": {"d": [16], "M": 200}})"));
  EXPECT_EQ(t.row_count(), 10u);
  EXPECT_NO_THROW(t.meta("feature_norm_layer1_mean"));
  EXPECT_NO_THROW(t.meta("centered_backprop_norm_layer2_cv"));
  EXPECT_EQ(t.meta("outside_band_0.02_50"), "0");
  EXPECT_THROW(run_concentration_suite(small(
                   Command::concentration,
                   R"({"allow_nonsmooth": true, "sweep": {"activation": "relu", "M": 200}})")),
               ConfigError);
}

TEST(Centering, IdentityResidualAndRankBound) {
  const CsvTable t = run_centering_suite(
      small(Command::centering, R"({"trials": 2, "sweep": {"d": [3, 8], "N": [12], "M": 300}})"));
  ASSERT_EQ(t.row_count(), 4u);
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    EXPECT_LE(t.value(i, "identity_residual"), 1e-8);
    if (t.value(i, "underparameterized") != 0) EXPECT_LE(t.value(i, "lmin_tilde"), 1e-8);
  }
  EXPECT_EQ(t.value(0, "underparameterized"), 1.0);
  EXPECT_EQ(t.value(3, "overparameterized"), 1.0);
  EXPECT_NO_THROW(t.meta("max_identity_residual"));
}

TEST(Training, SuiteRows) {
  const CsvTable t = run_training_suite(
      small(Command::training, R"({"trials": 2, "sweep": {"d": [8], "widths": [[8, 4]], "N": [6], "T": 30}})"));
  ASSERT_EQ(t.row_count(), 2u);
  for (double v : t.column("gamma_check_holds")) EXPECT_EQ(v, 1.0);
  for (double v : t.column("n2")) EXPECT_EQ(v, 8.0);
  for (double v : t.column("steps")) EXPECT_LE(v, 30.0);
}

TEST(Training, DivergencePropagates) {
  EXPECT_THROW(run_training_suite(small(Command::training,
                                        R"({"trials": 1, "sweep": {"eta": 1000, "T": 50}})")),
               DivergenceError);
}

TEST(Memorize, SuiteRows) {
  const CsvTable t = run_memorize(small(Command::memorize, R"({"trials": 2, "sweep": {"d": [8], "N": [8]}})"));
  ASSERT_EQ(t.row_count(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(t.value(i, "success"), 1.0);
    EXPECT_LE(t.value(i, "residual"), 1e-2);
  }
}

TEST(JacobianCheck, DefaultConfigPasses) {
  const CsvTable t = run_jacobian_check(default_config(Command::jacobian_check));
  ASSERT_EQ(t.row_count(), 6u);
  std::set<std::string> acts;
  for (std::size_t i = 0; i < t.row_count(); ++i) {
    EXPECT_EQ(t.value(i, "pass"), 1.0);
    EXPECT_LE(t.value(i, "n_params"), 500.0);
    acts.insert(std::get<std::string>(t.rows()[i][t.column_index("activation")]));
  }
  EXPECT_EQ(acts.size(), 3u);
}
