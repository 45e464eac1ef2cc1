// ntklab: command-line front end for the experiment suites.
//
//   ntklab <subcommand> [--config PATH] [--seed S] [--trials T] [--out PATH]
//          [--reproducible] [--allow-nonsmooth]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/experiment.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ntklab::ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical NTK laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::string out_path;
  bool reproducible = false;
  bool allow_nonsmooth = false;

  const char* names[] = {"scaling",  "phase",    "concentration", "centering",
                         "training", "memorize", "jacobian-check"};
  for (const char* name : names) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "master seed (overrides config)");
    sub->add_option("--trials", trials, "trials per sweep point (overrides config)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_path, "output CSV path (default: config output or stdout)");
    sub->add_flag("--reproducible", reproducible, "omit the timestamp metadata line");
    sub->add_flag("--allow-nonsmooth", allow_nonsmooth, "permit relu and identity activations");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const ntklab::Command cmd = ntklab::parse_command(name);
    ntklab::ExperimentConfig cfg = config_path.empty()
                                       ? ntklab::default_config(cmd)
                                       : ntklab::parse_config(read_file(config_path), cmd, allow_nonsmooth);
    if (seed) cfg.master_seed = *seed;
    if (trials) cfg.trials = *trials;
    if (allow_nonsmooth) cfg.allow_nonsmooth = true;
    if (!out_path.empty()) cfg.output = out_path;

    const ntklab::CsvTable table = ntklab::run(cmd, cfg);
    if (cfg.output.empty() || cfg.output == "-") {
      table.write(std::cout, reproducible);
    } else {
      std::ofstream out(cfg.output, std::ios::binary);
      if (!out) throw ntklab::ConfigError("output", "cannot open '" + cfg.output + "'");
      table.write(out, reproducible);
      std::cerr << "wrote " << table.row_count() << " rows to " << cfg.output << '\n';
    }
    for (const auto& [k, v] : table.metadata())
      if (k.rfind("slope_", 0) == 0) std::cerr << k << " = " << v << '\n';
    return 0;
  } catch (const ntklab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const ntklab::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumericExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericExit;
  }
}
