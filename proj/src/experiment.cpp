#include "ntklab/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <numeric>
#include <set>

#include "json.hpp"
#include "ntklab/centering.hpp"
#include "ntklab/errors.hpp"
#include "ntklab/ntk.hpp"
#include "ntklab/rng.hpp"

namespace ntklab {

using json = nlohmann::json;

Command parse_command(std::string_view name) {
  if (name == "scaling") return Command::scaling;
  if (name == "phase") return Command::phase;
  if (name == "concentration") return Command::concentration;
  if (name == "centering") return Command::centering;
  if (name == "training") return Command::training;
  if (name == "memorize") return Command::memorize;
  if (name == "jacobian-check") return Command::jacobian_check;
  throw ConfigError("command", "unknown subcommand '" + std::string(name) + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::scaling: return "scaling";
    case Command::phase: return "phase";
    case Command::concentration: return "concentration";
    case Command::centering: return "centering";
    case Command::training: return "training";
    case Command::memorize: return "memorize";
    case Command::jacobian_check: return "jacobian-check";
  }
  return "unknown";
}

ExperimentConfig default_config(Command c) {
  ExperimentConfig cfg;
  cfg.name = to_string(c);
  Sweep& s = cfg.sweep;
  switch (c) {
    case Command::scaling:
      s.d = {8, 12, 16, 24, 32};
      s.N = {16, 32, 64};
      break;
    case Command::phase:
      s.depth = 4;
      s.d = {4, 8, 16};
      s.N = {32, 128, 512};
      s.activation = Activation::relu;
      s.optimizer = Optimizer::adam;
      s.T = 3000;
      s.target_ratio = 0.0;
      cfg.allow_nonsmooth = true;
      break;
    case Command::concentration:
      s.d = {64};
      s.N = {1};
      s.activation = Activation::tanh;
      s.M = 1000;
      cfg.trials = 200;
      break;
    case Command::centering:
      s.d = {8, 16, 24};
      s.N = {16, 32, 96};
      s.activation = Activation::tanh;
      break;
    case Command::training:
      s.d = {16};
      s.widths = {{16, 8}};
      s.N = {16};
      s.activation = Activation::softplus;
      break;
    case Command::memorize:
      s.d = {24};
      s.N = {64};
      break;
    case Command::jacobian_check:
      s.d = {4};
      s.N = {4};
      cfg.trials = 6;
      break;
  }
  return cfg;
}

namespace {

template <class T>
std::vector<T> scalar_or_list(const json& v, const std::string& field) {
  std::vector<T> out;
  try {
    if (v.is_array()) {
      for (const auto& e : v) out.push_back(e.get<T>());
    } else {
      out.push_back(v.get<T>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
  if (out.empty()) throw ConfigError(field, "must not be empty");
  return out;
}

template <class T>
T get_as(const json& v, const std::string& field) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field, e.what());
  }
}

std::size_t positive_count(const json& v, const std::string& field) {
  const auto n = get_as<long long>(v, field);
  if (n < 1) throw ConfigError(field, "must be at least 1");
  return static_cast<std::size_t>(n);
}

std::vector<std::size_t> positive_counts(const json& v, const std::string& field) {
  std::vector<std::size_t> out;
  for (long long n : scalar_or_list<long long>(v, field)) {
    if (n < 1) throw ConfigError(field, "entries must be at least 1");
    out.push_back(static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view json_text, Command c, bool force_nonsmooth) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", e.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "top level must be an object");
  ExperimentConfig cfg = default_config(c);
  for (const auto& [key, v] : doc.items()) {
    if (key == "name") {
      cfg.name = get_as<std::string>(v, key);
      if (cfg.name.empty()) throw ConfigError(key, "must not be empty");
    } else if (key == "trials") {
      cfg.trials = positive_count(v, key);
    } else if (key == "master_seed") {
      cfg.master_seed = get_as<std::uint64_t>(v, key);
    } else if (key == "output") {
      cfg.output = get_as<std::string>(v, key);
    } else if (key == "allow_nonsmooth") {
      cfg.allow_nonsmooth = get_as<bool>(v, key);
    } else if (key == "sweep") {
      if (!v.is_object()) throw ConfigError("sweep", "must be an object");
      Sweep& s = cfg.sweep;
      for (const auto& [sk, sv] : v.items()) {
        const std::string field = "sweep." + sk;
        if (sk == "d") {
          s.d = positive_counts(sv, field);
        } else if (sk == "N") {
          s.N = positive_counts(sv, field);
        } else if (sk == "widths") {
          s.widths.clear();
          if (!sv.is_array() || sv.empty()) throw ConfigError(field, "must be a non-empty list");
          if (sv.front().is_array()) {
            for (const auto& w : sv) s.widths.push_back(positive_counts(w, field));
          } else {
            s.widths.push_back(positive_counts(sv, field));
          }
        } else if (sk == "depth") {
          s.depth = positive_count(sv, field);
        } else if (sk == "gamma") {
          s.gamma = scalar_or_list<double>(sv, field);
          for (double g : s.gamma)
            if (!(g > 0.0)) throw ConfigError(field, "entries must be positive");
        } else if (sk == "activation") {
          try {
            s.activation = parse_activation(get_as<std::string>(sv, field));
          } catch (const ConfigError& e) {
            throw ConfigError(field, e.what());
          }
        } else if (sk == "data") {
          try {
            s.data = parse_data_kind(get_as<std::string>(sv, field));
          } catch (const ConfigError& e) {
            throw ConfigError(field, e.what());
          }
        } else if (sk == "optimizer") {
          try {
            s.optimizer = parse_optimizer(get_as<std::string>(sv, field));
          } catch (const ConfigError& e) {
            throw ConfigError(field, e.what());
          }
        } else if (sk == "eta") {
          if (sv.is_null()) {
            s.eta.reset();
          } else {
            s.eta = get_as<double>(sv, field);
            if (!(*s.eta > 0.0)) throw ConfigError(field, "must be positive");
          }
        } else if (sk == "T") {
          const auto t = get_as<long long>(sv, field);
          if (t < 0) throw ConfigError(field, "must be non-negative");
          s.T = static_cast<std::size_t>(t);
        } else if (sk == "M") {
          const auto m = get_as<long long>(sv, field);
          if (m != 0 && m < 100) throw ConfigError(field, "must be 0 (auto) or at least 100");
          s.M = static_cast<std::size_t>(m);
        } else if (sk == "eps") {
          s.eps = get_as<double>(sv, field);
          if (!(s.eps > 0.0)) throw ConfigError(field, "must be positive");
        } else if (sk == "target_ratio") {
          s.target_ratio = get_as<double>(sv, field);
          if (s.target_ratio < 0.0) throw ConfigError(field, "must be non-negative");
        } else {
          throw ConfigError(field, "unknown key");
        }
      }
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  if (force_nonsmooth) cfg.allow_nonsmooth = true;
  // Validate every sweep point up front so a bad config fails before any work.
  for (const SweepPoint& pt : sweep_points(cfg)) (void)point_network(cfg, pt.d, pt.hidden);
  return cfg;
}

std::string config_json(const ExperimentConfig& cfg) {
  const Sweep& s = cfg.sweep;
  json sweep = {{"d", s.d},
                {"N", s.N},
                {"widths", s.widths},
                {"depth", s.depth},
                {"gamma", s.gamma},
                {"activation", to_string(s.activation)},
                {"data", to_string(s.data)},
                {"optimizer", to_string(s.optimizer)},
                {"T", s.T},
                {"M", s.M},
                {"eps", s.eps},
                {"target_ratio", s.target_ratio}};
  sweep["eta"] = s.eta ? json(*s.eta) : json(nullptr);
  json doc = {{"name", cfg.name},
              {"sweep", sweep},
              {"trials", cfg.trials},
              {"master_seed", cfg.master_seed},
              {"allow_nonsmooth", cfg.allow_nonsmooth}};
  return doc.dump();
}

NetConfig point_network(const ExperimentConfig& cfg, std::size_t d,
                        const std::vector<std::size_t>& hidden) {
  NetConfig net;
  net.activation = cfg.sweep.activation;
  net.allow_nonsmooth = cfg.allow_nonsmooth;
  net.widths.push_back(d);
  if (hidden.empty()) {
    if (cfg.sweep.depth < 2) throw ConfigError("sweep.depth", "must be at least 2");
    for (std::size_t l = 1; l < cfg.sweep.depth; ++l) net.widths.push_back(d);
  } else {
    if (hidden.size() + 1 != cfg.sweep.depth)
      throw ConfigError("sweep.widths", "expected " + std::to_string(cfg.sweep.depth - 1) +
                                            " hidden widths for depth " +
                                            std::to_string(cfg.sweep.depth));
    net.widths.insert(net.widths.end(), hidden.begin(), hidden.end());
  }
  net.validate();
  return net;
}

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  const Sweep& s = cfg.sweep;
  if (s.d.empty()) throw ConfigError("sweep.d", "must not be empty");
  if (s.N.empty()) throw ConfigError("sweep.N", "must not be empty");
  if (s.gamma.empty()) throw ConfigError("sweep.gamma", "must not be empty");
  const std::vector<std::vector<std::size_t>> hidden =
      s.widths.empty() ? std::vector<std::vector<std::size_t>>{{}} : s.widths;
  std::vector<SweepPoint> pts;
  for (std::size_t n : s.N)
    for (std::size_t d : s.d)
      for (const auto& h : hidden)
        for (double g : s.gamma) pts.push_back({pts.size(), n, d, h, g});
  return pts;
}

std::uint64_t trial_seed(const ExperimentConfig& cfg, std::size_t point, std::size_t trial) {
  return derive_seed(cfg.master_seed, cfg.name, point * 65536 + trial) & 0xffffffffULL;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) continue;
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    n += 1;
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  if (n < 2) return std::nan("");
  const double vx = sxx - sx * sx / n;
  if (vx <= 0.0) return std::nan("");
  return (sxy - sx * sy / n) / vx;
}

namespace {

using Row = std::vector<CsvCell>;

struct Task {
  SweepPoint point;
  std::size_t trial;
  std::uint64_t seed;
};

std::vector<Task> make_tasks(const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  std::vector<Task> tasks;
  for (const SweepPoint& pt : sweep_points(cfg))
    for (std::size_t t = 0; t < cfg.trials; ++t)
      tasks.push_back({pt, t, trial_seed(cfg, pt.index, t)});
  return tasks;
}

/// Runs fn over every task on the OpenMP pool and returns the per-task rows in
/// task order. The first exception by task index is rethrown.
template <class Fn>
std::vector<std::vector<Row>> fan_out(const std::vector<Task>& tasks, Fn&& fn) {
  std::vector<std::vector<Row>> out(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  const auto n = static_cast<std::ptrdiff_t>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(k);
    try {
      out[i] = fn(tasks[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

CsvTable make_table(const ExperimentConfig& cfg, Command c, std::vector<std::string> header,
                    const std::vector<std::vector<Row>>& rows) {
  CsvTable t(std::move(header));
  t.add_metadata("ntklab", std::string(kVersion));
  t.add_metadata("command", to_string(c));
  t.add_metadata("config", config_json(cfg));
  for (const auto& group : rows)
    for (const auto& r : group) t.add_row(r);
  return t;
}

std::int64_t flag(bool b) { return b ? 1 : 0; }
std::int64_t count(std::size_t n) { return static_cast<std::int64_t>(n); }

std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "-" : "") + std::to_string(w[i]);
  return s;
}

DataSpec point_data(const ExperimentConfig& cfg, std::size_t d) { return {cfg.sweep.data, d}; }

std::uint64_t child(std::uint64_t seed, std::string_view tag) { return derive_seed(seed, tag, 0); }

struct Moments {
  double mean = 0.0, sd = 0.0, min = 0.0, max = 0.0;
  double cv() const { return mean != 0.0 ? sd / std::abs(mean) : 0.0; }
};

Moments moments(std::span<const double> v) {
  Moments m;
  if (v.empty()) return m;
  m.min = *std::min_element(v.begin(), v.end());
  m.max = *std::max_element(v.begin(), v.end());
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
  m.sd = v.size() > 1 ? std::sqrt(m.sd / static_cast<double>(v.size() - 1)) : 0.0;
  return m;
}

}  // namespace

CsvTable run_scaling(const ExperimentConfig& cfg) {
  if (cfg.sweep.depth != 3) throw ConfigError("sweep.depth", "scaling requires a 3-layer network");
  if (!cfg.sweep.widths.empty())
    throw ConfigError("sweep.widths", "scaling uses d = n1 = n2; do not set widths");
  const auto tasks = make_tasks(cfg);
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig net = point_network(cfg, t.point.d, t.point.hidden);
    const Params p = init_standard(net, child(t.seed, "weights"));
    const Dataset ds = sample(point_data(cfg, t.point.d), t.point.N, child(t.seed, "data"));
    const JacobianBundle b = assemble_jacobian(p, ds.X);
    const UpperBoundCheck ub = upper_bound_check(b);
    const std::size_t n1n2 = net.widths[1] * net.widths[2];
    return std::vector<Row>{{count(t.point.N), count(t.point.d), count(net.widths[1]),
                             count(net.widths[2]), count(n1n2), count(t.seed), count(t.trial),
                             ub.lambda_min, ub.k11, flag(ub.holds),
                             flag(4 * t.point.N <= n1n2)}};
  });
  CsvTable table = make_table(cfg, Command::scaling,
                              {"N", "d", "n1", "n2", "n1n2", "seed", "trial", "lambda_min", "k11",
                               "upper_bound_holds", "overparameterized"},
                              rows);
  for (std::size_t n : cfg.sweep.N) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < table.row_count(); ++i) {
      if (table.value(i, "N") != static_cast<double>(n)) continue;
      x.push_back(table.value(i, "n1n2"));
      y.push_back(table.value(i, "lambda_min"));
    }
    table.add_metadata("slope_N" + std::to_string(n), format_number(loglog_slope(x, y)));
  }
  return table;
}

CsvTable run_phase_transition(const ExperimentConfig& cfg) {
  if (cfg.sweep.depth != 4) throw ConfigError("sweep.depth", "phase requires a 4-layer network");
  const auto tasks = make_tasks(cfg);
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig net = point_network(cfg, t.point.d, t.point.hidden);
    const Params p = init_standard(net, child(t.seed, "weights"));
    const Dataset ds = sample({DataKind::gaussian, t.point.d}, t.point.N, child(t.seed, "data"));
    CounterRng rng(child(t.seed, "targets"));
    Vec Y(t.point.N);
    for (double& v : Y) v = rng.normal();
    TrainConfig tc;
    tc.optimizer = cfg.sweep.optimizer;
    tc.eta = cfg.sweep.eta;
    tc.T = cfg.sweep.T;
    tc.target_ratio = cfg.sweep.target_ratio;
    if (cfg.sweep.optimizer == Optimizer::adam && cfg.sweep.eta) tc.adam.lr = *cfg.sweep.eta;
    const TrainReport rep = gd_train(p, ds.X, Y, tc);
    const std::size_t n1n2 = net.widths[1] * net.widths[2];
    const std::size_t P = p.parameter_count();
    std::string regime = "intermediate";
    if (n1n2 >= 8 * t.point.N) regime = "over";
    if (8 * P <= t.point.N) regime = "under";
    const double L0 = rep.losses.front();
    const double Lf = rep.losses.back();
    return std::vector<Row>{{count(t.point.N), count(t.point.d), count(net.depth()), count(P),
                             count(n1n2), count(t.seed), count(t.trial), L0, Lf,
                             L0 > 0 ? Lf / L0 : 0.0, count(rep.losses.size() - 1), regime}};
  });
  return make_table(cfg, Command::phase,
                    {"N", "d", "depth", "n_params", "n1n2", "seed", "trial", "initial_loss",
                     "final_loss", "loss_ratio", "steps", "regime"},
                    rows);
}

CsvTable run_concentration_suite(const ExperimentConfig& cfg) {
  if (!activation_kind(cfg.sweep.activation).smooth ||
      !activation_kind(cfg.sweep.activation).nonlinear)
    throw ConfigError("sweep.activation", "concentration suite needs a smooth activation");
  const auto tasks = make_tasks(cfg);
  const std::size_t M = cfg.sweep.M == 0 ? 1000 : cfg.sweep.M;
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig net = point_network(cfg, t.point.d, t.point.hidden);
    const Params p = init_standard(net, child(t.seed, "weights"));
    const DataSpec spec = point_data(cfg, t.point.d);
    const LayerMeans means = estimate_layer_means(p, spec, M, child(t.seed, "means"));
    const Vec x = sample_point(spec, child(t.seed, "x"), 0);
    const NormSample s = norm_sample(p, means, x);
    std::vector<Row> out;
    for (std::size_t l = 0; l < s.feature.size(); ++l)
      out.push_back({count(t.point.d), count(l + 1), count(net.widths[l + 1]), count(t.seed),
                     count(t.trial), s.feature[l], s.centered_feature[l], s.centered_backprop});
    return out;
  });
  CsvTable table =
      make_table(cfg, Command::concentration,
                 {"d", "layer", "width", "seed", "trial", "feature_norm", "centered_feature_norm",
                  "centered_backprop_norm"},
                 rows);
  std::size_t outside = 0;
  for (const char* col : {"feature_norm", "centered_feature_norm", "centered_backprop_norm"}) {
    const std::vector<double> v = table.column(col);
    for (double x : v)
      if (x < 0.02 || x > 50.0) ++outside;
    std::set<double> layers;
    for (double l : table.column("layer")) layers.insert(l);
    for (double l : layers) {
      std::vector<double> sub;
      for (std::size_t i = 0; i < table.row_count(); ++i)
        if (table.value(i, "layer") == l) sub.push_back(table.value(i, col));
      const Moments m = moments(sub);
      const std::string key = std::string(col) + "_layer" + format_number(l);
      table.add_metadata(key + "_mean", format_number(m.mean));
      table.add_metadata(key + "_cv", format_number(m.cv()));
      table.add_metadata(key + "_min", format_number(m.min));
      table.add_metadata(key + "_max", format_number(m.max));
    }
  }
  table.add_metadata("outside_band_0.02_50", std::to_string(outside));
  return table;
}

CsvTable run_centering_suite(const ExperimentConfig& cfg) {
  const auto tasks = make_tasks(cfg);
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig net = point_network(cfg, t.point.d, t.point.hidden);
    const std::size_t L = net.depth();
    const Params p = init_standard(net, child(t.seed, "weights"));
    const DataSpec spec = point_data(cfg, t.point.d);
    const Dataset ds = sample(spec, t.point.N, child(t.seed, "data"));
    const std::size_t M =
        cfg.sweep.M == 0 ? default_mean_samples(t.point.N) : cfg.sweep.M;
    const ExpectationEstimates est = estimate_means(p, spec, M, child(t.seed, "means"));
    const CenteringGapReport g = gap_report(p, ds.X, est);
    const std::size_t n1 = net.widths[L - 2];
    const std::size_t n2 = net.widths[L - 1];
    const double n1n2 = static_cast<double>(n1 * n2);
    RowStats rs{};
    if (t.point.N >= 2) rs = row_stats(centered_jacobian(p, ds.X, est), 64, child(t.seed, "psi"));
    const GramOpnorms go = gram_opnorm_diag(p, ds.X, est);
    const auto& c = g.correction_opnorms;
    return std::vector<Row>{{count(t.point.N),
                             count(t.point.d),
                             count(n1),
                             count(n2),
                             count(t.seed),
                             count(t.trial),
                             count(M),
                             g.lmin_K,
                             g.lmin_KL2,
                             g.lmin_FB,
                             g.lmin_tilde,
                             g.lmin_tilde / n1n2,
                             c.at("lambda_B"),
                             c.at("gamma_F"),
                             c.at("step_b"),
                             c.at("lambda_BB"),
                             c.at("zeta_FF"),
                             g.max_correction,
                             g.identity_residual,
                             g.nu_norm,
                             g.eta_norm,
                             rs.eta_min,
                             rs.eta_max,
                             rs.psi1_est,
                             rs.eta_min * rs.eta_min - g.lmin_tilde,
                             go.opF,
                             go.opB,
                             flag(g.lmin_KL2 >= g.lmin_tilde - g.max_correction),
                             flag(4 * t.point.N <= n1 * n2),
                             flag(t.point.N > n1 * n2)}};
  });
  CsvTable table = make_table(
      cfg, Command::centering,
      {"N", "d", "n1", "n2", "seed", "trial", "M", "lmin_K", "lmin_KL2", "lmin_FB", "lmin_tilde",
       "lmin_tilde_scaled", "corr_lambda_B", "corr_gamma_F", "corr_step_b", "corr_lambda_BB",
       "corr_zeta_FF", "max_correction", "identity_residual", "nu_norm", "eta_norm", "row_eta_min",
       "row_eta_max", "psi1", "eta_min_sq_minus_lmin_tilde", "opF", "opB", "inequality_holds",
       "overparameterized", "underparameterized"},
      rows);
  std::size_t over = 0, holds = 0, floor_ok = 0;
  double max_res = 0.0;
  for (std::size_t i = 0; i < table.row_count(); ++i) {
    max_res = std::max(max_res, table.value(i, "identity_residual"));
    if (table.value(i, "overparameterized") == 0) continue;
    ++over;
    holds += table.value(i, "inequality_holds") != 0 ? 1 : 0;
    floor_ok += table.value(i, "lmin_tilde_scaled") >= 1e-3 ? 1 : 0;
  }
  table.add_metadata("max_identity_residual", format_number(max_res));
  table.add_metadata("overparameterized_rows", std::to_string(over));
  table.add_metadata("inequality_holds_rows", std::to_string(holds));
  table.add_metadata("lmin_tilde_floor_rows", std::to_string(floor_ok));
  return table;
}

CsvTable run_training_suite(const ExperimentConfig& cfg) {
  const auto tasks = make_tasks(cfg);
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig base = point_network(cfg, t.point.d, t.point.hidden);
    AntisymConfig ac{base, t.point.gamma, child(t.seed, "weights")};
    const Params p0 = antisym_init(ac);
    const std::size_t L = p0.depth();
    const Dataset ds = sample(point_data(cfg, t.point.d), t.point.N, child(t.seed, "data"));
    const Vec Y = normalized_targets(t.point.N, child(t.seed, "targets"));

    const JacobianBundle b0 = assemble_jacobian(p0, ds.X, {.materialize = false, .kernel = false});
    const SpectrumReport sr = sym_eig_extremes(ntk_layerwise(b0));

    TrainConfig tc;
    tc.eta = cfg.sweep.eta;
    tc.T = cfg.sweep.T;
    tc.optimizer = cfg.sweep.optimizer;
    tc.target_ratio = cfg.sweep.target_ratio;
    const TrainReport rep = gd_train(p0, ds.X, Y, tc);
    bool monotone = true;
    for (std::size_t k = 1; k < rep.losses.size(); ++k)
      if (rep.losses[k] > rep.losses[k - 1]) monotone = false;
    const double alpha = std::sqrt(std::max(sr.lambda_min, 0.0));
    const double rmax = *std::max_element(rep.radius_trace.begin(), rep.radius_trace.end());

    bool gamma_ok = true;
    for (const GammaRow& gr : gamma_scaling_check(ac, ds.X, {1.0, 4.0, 16.0}))
      gamma_ok = gamma_ok && gr.holds;

    double mem_res = std::nan("");
    bool mem_ok = false;
    try {
      const MemorizeResult mr = memorize(p0, ds.X, Y, cfg.sweep.eps);
      mem_res = mr.residual;
      mem_ok = true;
    } catch (const PrecisionFloor& e) {
      mem_res = e.best_residual;
    } catch (const NotWellConditioned&) {
    }
    const double L0 = rep.losses.front();
    return std::vector<Row>{{count(t.point.N),
                             count(t.point.d),
                             count(p0.weights[L - 2].rows()),
                             count(p0.weights[L - 1].rows()),
                             t.point.gamma,
                             count(t.seed),
                             count(t.trial),
                             rep.eta,
                             sr.lambda_min,
                             sr.lambda_max,
                             L0,
                             rep.losses.back(),
                             L0 > 0 ? rep.losses.back() / L0 : 0.0,
                             count(rep.losses.size() - 1),
                             flag(rep.converged),
                             rep.rate_fit,
                             rep.r2,
                             flag(monotone),
                             rmax,
                             alpha,
                             flag(radius_check(rep, alpha)),
                             flag(gamma_ok),
                             mem_res,
                             flag(mem_ok)}};
  });
  return make_table(cfg, Command::training,
                    {"N", "d", "n1", "n2", "gamma", "seed", "trial", "eta", "lmin_K0", "lmax_K0",
                     "initial_loss", "final_loss", "loss_ratio", "steps", "converged", "rate_fit",
                     "r2", "monotone", "radius_max", "alpha_est", "radius_ok", "gamma_check_holds",
                     "memorize_residual", "memorize_ok"},
                    rows);
}

CsvTable run_memorize(const ExperimentConfig& cfg) {
  const auto tasks = make_tasks(cfg);
  const auto rows = fan_out(tasks, [&](const Task& t) {
    const NetConfig net = point_network(cfg, t.point.d, t.point.hidden);
    const std::size_t L = net.depth();
    const Params p = init_standard(net, child(t.seed, "weights"));
    const Dataset ds = sample(point_data(cfg, t.point.d), t.point.N, child(t.seed, "data"));
    const Vec Y = normalized_targets(t.point.N, child(t.seed, "targets"));
    const double lmin = lambda_min(ntk_layerwise(
        assemble_jacobian(p, ds.X, {.materialize = false, .kernel = false})));
    double h = std::nan(""), res = std::nan("");
    std::size_t tried = 0;
    bool ok = false;
    try {
      const MemorizeResult mr = memorize(p, ds.X, Y, cfg.sweep.eps);
      h = mr.h;
      res = mr.residual;
      tried = mr.trace.size();
      ok = true;
    } catch (const PrecisionFloor& e) {
      h = e.best_h;
      res = e.best_residual;
    } catch (const NotWellConditioned&) {
    }
    return std::vector<Row>{{count(t.point.N), count(t.point.d), count(net.widths[L - 2]),
                             count(net.widths[L - 1]), count(t.seed), count(t.trial), lmin, h,
                             res, count(tried), flag(ok)}};
  });
  return make_table(cfg, Command::memorize,
                    {"N", "d", "n1", "n2", "seed", "trial", "lmin_K0", "h", "residual", "h_tried",
                     "success"},
                    rows);
}

CsvTable run_jacobian_check(const ExperimentConfig& cfg) {
  const auto tasks = make_tasks(cfg);
  const Activation smooth[] = {Activation::sigmoid, Activation::tanh, Activation::softplus};
  const auto rows = fan_out(tasks, [&](const Task& t) {
    CounterRng rng(child(t.seed, "shape"));
    NetConfig net;
    const std::size_t L = 2 + t.trial % 3;
    net.widths.push_back(t.point.d);
    for (std::size_t l = 1; l < L; ++l) {
      const std::size_t cap = std::min<std::size_t>(6, 2 * net.widths.back());
      net.widths.push_back(2 + rng.next_u64() % (cap - 1));
    }
    net.activation = smooth[t.trial % 3];
    net.validate();
    const Params p = init_standard(net, child(t.seed, "weights"));
    const Dataset ds = sample(point_data(cfg, t.point.d), t.point.N, child(t.seed, "data"));
    const JacobianBundle b = assemble_jacobian(p, ds.X);
    const Mat fd = finite_difference_jacobian(p, ds.X);
    double max_abs = 0.0, max_rel = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      const double e = std::abs(b.J.data()[k] - fd.data()[k]);
      max_abs = std::max(max_abs, e);
      max_rel = std::max(max_rel, e / (1.0 + std::abs(fd.data()[k])));
    }
    const double layerwise =
        frobenius_norm(subtract(b.K, ntk_layerwise(b))) / std::max(frobenius_norm(b.K), 1e-300);
    return std::vector<Row>{{count(t.trial), count(t.seed), count(L), join_widths(net.widths),
                             to_string(net.activation), count(t.point.N),
                             count(p.parameter_count()), max_abs, max_rel, layerwise,
                             flag(max_rel <= 1e-5 && layerwise <= 1e-9)}};
  });
  return make_table(cfg, Command::jacobian_check,
                    {"trial", "seed", "depth", "widths", "activation", "N", "n_params",
                     "max_abs_err", "max_rel_err", "layerwise_residual", "pass"},
                    rows);
}

CsvTable run(Command c, const ExperimentConfig& cfg) {
  switch (c) {
    case Command::scaling: return run_scaling(cfg);
    case Command::phase: return run_phase_transition(cfg);
    case Command::concentration: return run_concentration_suite(cfg);
    case Command::centering: return run_centering_suite(cfg);
    case Command::training: return run_training_suite(cfg);
    case Command::memorize: return run_memorize(cfg);
    case Command::jacobian_check: return run_jacobian_check(cfg);
  }
  throw ConfigError("command", "unknown subcommand");
}

}  // namespace ntklab
