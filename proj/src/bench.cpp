#include "bench.hpp"

#include "errors.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>

namespace sg::bench {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string to_string(std::size_t v) { return std::to_string(v); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void add_solver_parameters(BenchRecord& r, const SolverConfig& cfg) {
  r.parameters.emplace_back("inner_steps", to_string(cfg.inner_steps));
  r.parameters.emplace_back("inner_eta", format_double(cfg.inner_eta));
  r.parameters.emplace_back("outer_steps", to_string(cfg.outer_steps));
  r.parameters.emplace_back("outer_eta", format_double(cfg.outer_eta));
  r.parameters.emplace_back("method", method_name(cfg.method));
}

std::string describe(const DataSource& source) {
  std::string s;
  if (source.wine_csv) {
    s = source.wine_csv->string();
  } else {
    s = "synthetic(" + to_string(source.synthetic_rows) + "x" +
        to_string(source.synthetic_features) + ";noise=" + format_double(source.synthetic_noise) + ")";
  }
  return s;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<BenchRecord>& records) {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << csv_field(columns[c]);
  out << '\n';
  for (const auto& r : records) {
    std::map<std::string, std::string, std::less<>> cells;
    cells["experiment"] = r.experiment;
    cells["seed"] = r.seed;
    cells["timestamp"] = r.timestamp;
    for (const auto& [k, v] : r.parameters) cells[k] = v;
    for (const auto& [k, v] : r.metrics) cells[k] = v;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto it = cells.find(columns[c]);
      out << (c ? "," : "") << (it == cells.end() ? std::string() : csv_field(it->second));
    }
    out << '\n';
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, ptr);
}

std::string method_name(HypergradientMethod m) {
  return m == HypergradientMethod::Backward ? "backward" : "forward";
}

// --------------------------------------------------------------- quadratic

std::vector<QuadraticRow> run_quadratic(const QuadraticOptions& options) {
  if (options.dims.empty()) throw std::invalid_argument("quadratic: dims must be nonempty");
  if (options.methods.empty()) throw std::invalid_argument("quadratic: no method selected");
  if (options.repeats < 1) throw std::invalid_argument("quadratic: repeats must be >= 1");

  std::vector<QuadraticRow> rows;
  for (std::size_t dim : options.dims) {
    const DifferentiableGame game = quadratic_game(dim);
    for (HypergradientMethod method : options.methods) {
      SolverConfig cfg;
      cfg.inner_steps = options.inner_steps;
      cfg.inner_eta = options.inner_eta;
      cfg.outer_steps = options.outer_steps;
      cfg.outer_eta = options.outer_eta;
      cfg.method = method;

      QuadraticRow row;
      row.dim = dim;
      row.method = method;
      std::vector<double> times;
      for (std::size_t r = 0; r < options.repeats; ++r) {
        const SolutionReport sol = solve_stackelberg(game, cfg);
        times.push_back(sol.total_wall_time);
        row.trace_length = sol.peak_trace_length;
        if (sol.error) {
          row.error = sol.error;
          break;
        }
        if (r + 1 == options.repeats) {
          row.alpha_max_abs_error = (sol.final_alpha.array() + 3.5).abs().maxCoeff();
          row.beta_max_abs_error = (sol.final_beta.array() + 3.5).abs().maxCoeff();
        }
      }
      row.median_seconds = median(times);
      if (row.error) {
        row.alpha_max_abs_error = std::numeric_limits<double>::quiet_NaN();
        row.beta_max_abs_error = std::numeric_limits<double>::quiet_NaN();
      }
      rows.push_back(row);
    }
  }
  return rows;
}

const std::vector<std::string>& quadratic_columns() {
  static const std::vector<std::string> cols{
      "dim",         "method",    "median_seconds", "alpha_max_abs_error", "trace_length",
      "beta_max_abs_error", "repeats", "inner_steps", "inner_eta", "outer_steps",
      "outer_eta",   "seed",      "error",          "timestamp"};
  return cols;
}

std::vector<BenchRecord> quadratic_records(const QuadraticOptions& options,
                                           const std::vector<QuadraticRow>& rows) {
  const std::string stamp = utc_timestamp();
  std::vector<BenchRecord> out;
  for (const auto& row : rows) {
    BenchRecord r;
    r.experiment = "quadratic";
    r.seed = std::to_string(options.seed);
    r.timestamp = stamp;
    r.parameters = {{"dim", to_string(row.dim)},
                    {"method", method_name(row.method)},
                    {"repeats", to_string(options.repeats)},
                    {"inner_steps", to_string(options.inner_steps)},
                    {"inner_eta", format_double(options.inner_eta)},
                    {"outer_steps", to_string(options.outer_steps)},
                    {"outer_eta", format_double(options.outer_eta)}};
    r.metrics = {{"median_seconds", format_double(row.median_seconds)},
                 {"alpha_max_abs_error", format_double(row.alpha_max_abs_error)},
                 {"beta_max_abs_error", format_double(row.beta_max_abs_error)},
                 {"trace_length", to_string(row.trace_length)},
                 {"error", row.error.value_or("")}};
    out.push_back(std::move(r));
  }
  return out;
}

// -------------------------------------------------------------- regression

Dataset load_data(const DataSource& source, std::uint64_t seed) {
  Dataset d = source.wine_csv
                  ? load_wine_csv(*source.wine_csv)
                  : synth_dataset(seed, source.synthetic_rows, source.synthetic_features,
                                  source.synthetic_noise);
  if (source.subsample > 0) d = subsample(d, source.subsample, seed);
  return d;
}

std::vector<ExperimentResult> run_regression(const RegressionOptions& options) {
  if (options.cd_grid.empty()) throw std::invalid_argument("regression: empty c_d grid");
  if (options.seeds.empty()) throw std::invalid_argument("regression: no seeds");
  for (double c : options.cd_grid) {
    if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("regression: c_d must be >= 0");
  }

  std::vector<ExperimentResult> results;
  for (std::uint64_t seed : options.seeds) {
    const Dataset data = load_data(options.data, seed);
    const PreparedData prepared = prepare_regression_data(data, options.experiment, seed);
    for (double c_d : options.cd_grid) {
      results.push_back(run_regression_experiment(prepared, c_d, options.experiment, seed));
    }
  }
  return results;
}

const std::vector<std::string>& regression_columns() {
  static const std::vector<std::string> cols{
      "c_d",         "seed",        "rho",        "rmse_raw",    "rmse_nash",
      "seconds_per_outer_epoch",    "train_rows", "test_rows",   "features",
      "data",        "inner_steps", "inner_eta",  "outer_steps", "outer_eta",
      "method",      "error",       "timestamp"};
  return cols;
}

std::vector<BenchRecord> regression_records(const RegressionOptions& options,
                                            const std::vector<ExperimentResult>& results) {
  const std::string stamp = utc_timestamp();
  const std::string data = describe(options.data);
  auto base = [&](double c_d) {
    BenchRecord r;
    r.experiment = "regression";
    r.timestamp = stamp;
    r.parameters.emplace_back("c_d", format_double(c_d));
    r.parameters.emplace_back("data", data);
    add_solver_parameters(r, options.experiment.solver);
    return r;
  };

  std::vector<BenchRecord> out;
  for (const auto& e : results) {
    BenchRecord r = base(e.c_d);
    r.seed = std::to_string(e.seed);
    r.metrics = {{"rho", format_double(e.rho)},
                 {"rmse_raw", format_double(e.rmse_raw)},
                 {"rmse_nash", format_double(e.rmse_nash)},
                 {"seconds_per_outer_epoch", format_double(e.seconds_per_outer_epoch)},
                 {"train_rows", to_string(e.train_rows)},
                 {"test_rows", to_string(e.test_rows)},
                 {"features", to_string(e.features)},
                 {"error", e.error.value_or("")}};
    out.push_back(std::move(r));
  }

  for (double c_d : options.cd_grid) {
    double raw = 0.0, nash = 0.0, secs = 0.0;
    std::size_t count = 0;
    std::string error;
    for (const auto& e : results) {
      if (e.c_d != c_d) continue;
      raw += e.rmse_raw;
      nash += e.rmse_nash;
      secs += e.seconds_per_outer_epoch;
      ++count;
      if (e.error && error.empty()) error = *e.error;
    }
    if (count == 0) continue;
    const double n = static_cast<double>(count);
    BenchRecord r = base(c_d);
    r.seed = "mean";
    r.metrics = {{"rmse_raw", format_double(raw / n)},
                 {"rmse_nash", format_double(nash / n)},
                 {"seconds_per_outer_epoch", format_double(secs / n)},
                 {"error", error}};
    out.push_back(std::move(r));
  }
  return out;
}

// ------------------------------------------------------------- convergence

ConvergenceResult run_convergence(const ConvergenceOptions& options) {
  if (options.num_inits < 1) throw std::invalid_argument("convergence: num_inits must be >= 1");
  if (!(options.c_d >= 0.0)) throw std::invalid_argument("convergence: c_d must be >= 0");

  const Dataset data = load_data(options.data, options.seed);
  const PreparedData prepared = prepare_regression_data(data, options.experiment, options.seed);

  ConvergenceResult result;
  result.rho = prepared.rho;
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto p = static_cast<Eigen::Index>(prepared.train.cols());

  for (std::size_t i = 0; i < options.num_inits; ++i) {
    SolverConfig cfg = options.experiment.solver;
    cfg.alpha0.resize(p);
    for (auto& a : cfg.alpha0) a = normal(rng);
    const NashResult nash =
        nash_train(prepared.train, options.c_d, cfg, prepared.rho, options.experiment.c_l);
    result.paths.push_back(nash.solution.leader_objective_path);
    result.errors.push_back(nash.solution.error);
  }

  result.best_final = std::numeric_limits<double>::infinity();
  result.worst_final = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.paths.size(); ++i) {
    if (result.errors[i] || result.paths[i].empty()) continue;
    result.best_final = std::min(result.best_final, result.paths[i].back());
    result.worst_final = std::max(result.worst_final, result.paths[i].back());
  }
  return result;
}

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result) {
  out << "epoch";
  for (std::size_t i = 0; i < result.paths.size(); ++i) out << ",init_" << i;
  out << '\n';
  std::size_t epochs = 0;
  for (const auto& p : result.paths) epochs = std::max(epochs, p.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    out << e;
    for (const auto& p : result.paths) {
      out << ',';
      if (e < p.size()) out << format_double(p[e]);
    }
    out << '\n';
  }
}

// --------------------------------------------------------------- gradcheck

double relative_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("relative_gap: size mismatch");
  return (a - b).norm() / (1.0 + b.norm());
}

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.dim < 1) throw std::invalid_argument("gradcheck: dim must be >= 1");
  if (options.inner_steps < 1) throw std::invalid_argument("gradcheck: inner steps must be >= 1");
  if (!(options.inner_eta > 0.0)) throw std::invalid_argument("gradcheck: eta must be > 0");

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto n = static_cast<Eigen::Index>(options.dim);
  Eigen::VectorXd alpha(n);
  SolverConfig cfg;
  cfg.inner_steps = options.inner_steps;
  cfg.inner_eta = options.inner_eta;

  const auto game = [&]() -> DifferentiableGame {
    if (options.game == GameSelector::Quadratic) {
      for (auto& a : alpha) a = normal(rng);
      return quadratic_game(options.dim);
    }
    if (options.rows < 1) throw std::invalid_argument("gradcheck: rows must be >= 1");
    const Dataset d = synth_dataset(rng(), options.rows, options.dim, 0.1);
    for (auto& a : alpha) a = 0.5 * normal(rng) / std::sqrt(static_cast<double>(options.dim));
    RegressionGameSpec spec;
    spec.X = d.X;
    spec.y = d.y;
    spec.c_d = options.c_d;
    return regression_game(spec);
  }();

  GradcheckReport report;
  cfg.method = HypergradientMethod::Forward;
  const Eigen::VectorXd forward = hypergradient(game, alpha, cfg).grad;
  const Eigen::VectorXd fd = fd_hypergradient(game, alpha, cfg, std::cbrt(std::numeric_limits<double>::epsilon()));
  report.fd_vs_forward = relative_gap(forward, fd);
  report.fd_ok = report.fd_vs_forward <= options.tolerance;

  cfg.method = HypergradientMethod::Backward;
  cfg.hessian_point = HessianPoint::CurrentIterate;
  report.exact_backward_vs_forward = relative_gap(hypergradient(game, alpha, cfg).grad, forward);
  report.exact_ok = report.exact_backward_vs_forward <= options.exact_tolerance;

  // Paper-faithful backward at fixed T*eta with eta halved twice.
  report.gap_ok = true;
  for (std::size_t i = 0; i < 3; ++i) {
    SolverConfig c = cfg;
    c.inner_eta = options.inner_eta / static_cast<double>(1u << i);
    c.inner_steps = options.inner_steps << i;
    c.method = HypergradientMethod::Forward;
    const Eigen::VectorXd fwd = hypergradient(game, alpha, c).grad;
    c.method = HypergradientMethod::Backward;
    c.hessian_point = HessianPoint::NextIterate;
    const double gap = relative_gap(hypergradient(game, alpha, c).grad, fwd);
    if (i > 0) {
      const double prev = report.faithful_gaps.back();
      if (!(gap < prev || (gap <= kGapNoiseFloor && prev <= kGapNoiseFloor))) report.gap_ok = false;
    }
    report.etas.push_back(c.inner_eta);
    report.faithful_gaps.push_back(gap);
  }
  return report;
}

}  // namespace sg::bench
