// sgbench: experiment and validation driver over the stackelberg C API.
//
// Exit codes: 0 success, 1 validation failure, 2 input error.

#include <stackelberg/stackelberg.h>

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kInputError = 2;

struct SolverFlags {
  std::optional<std::size_t> inner_steps;
  std::optional<double> inner_eta;
  std::optional<std::size_t> outer_steps;
  std::optional<double> outer_eta;
  std::string method;

  void add(CLI::App& app, const std::string& methods) {
    app.add_option("--inner-steps", inner_steps, "Follower steps T")->check(CLI::PositiveNumber);
    app.add_option("--inner-eta", inner_eta, "Follower step size")->check(CLI::PositiveNumber);
    app.add_option("--outer-steps", outer_steps, "Leader steps")->check(CLI::NonNegativeNumber);
    app.add_option("--outer-eta", outer_eta, "Leader step size")->check(CLI::PositiveNumber);
    app.add_option("--method", method, "Hypergradient method")
        ->check(CLI::IsMember(CLI::detail::split(methods, ',')));
  }

  void apply(sg_solver_config& c) const {
    if (inner_steps) c.inner_steps = *inner_steps;
    if (inner_eta) c.inner_eta = *inner_eta;
    if (outer_steps) c.outer_steps = *outer_steps;
    if (outer_eta) c.outer_eta = *outer_eta;
    if (method == "forward") c.method = SG_METHOD_FORWARD;
    if (method == "backward") c.method = SG_METHOD_BACKWARD;
  }
};

struct DataFlags {
  std::string data;
  bool synthetic = false;
  std::size_t rows = 300;
  std::size_t features = 11;
  double noise = 0.1;
  std::size_t subsample = 0;
  std::vector<double> rho_grid;
  std::size_t pca_components = 0;
  std::size_t holdout_reps = 10;

  void add(CLI::App& app) {
    auto* d = app.add_option("--data", data, "UCI wine CSV (semicolon separated)")
                  ->check(CLI::ExistingFile);
    auto* s = app.add_flag("--synthetic", synthetic, "Use synthetic linear-model data");
    d->excludes(s);
    app.add_option("--synthetic-rows", rows, "Synthetic rows")->check(CLI::PositiveNumber);
    app.add_option("--synthetic-features", features, "Synthetic features")->check(CLI::PositiveNumber);
    app.add_option("--noise", noise, "Synthetic noise std")->check(CLI::NonNegativeNumber);
    app.add_option("--subsample", subsample, "Random row subset (0 keeps all)");
    app.add_option("--rho-grid", rho_grid, "Ridge penalties for hold-out selection")->delimiter(',');
    app.add_option("--pca-components", pca_components, "Principal components (0: all)");
    app.add_option("--holdout-reps", holdout_reps, "Hold-out repetitions")->check(CLI::PositiveNumber);
  }

  // Fills `source`; `experiment` keeps pointers into this object.
  void apply(sg_data_source& source, sg_experiment_config& experiment) const {
    source.wine_csv = data.empty() ? nullptr : data.c_str();
    source.synthetic_rows = rows;
    source.synthetic_features = features;
    source.synthetic_noise = noise;
    source.subsample = subsample;
    if (!rho_grid.empty()) {
      experiment.rho_grid = rho_grid.data();
      experiment.rho_grid_len = rho_grid.size();
    }
    experiment.pca_components = pca_components;
    experiment.holdout_repetitions = holdout_reps;
  }
};

int report_status(sg_status status) {
  if (status == SG_OK) return kOk;
  std::fprintf(stderr, "sgbench: %s: %s\n", sg_status_string(status), sg_last_error());
  switch (status) {
    case SG_ERR_INVALID_ARGUMENT:
    case SG_ERR_DIMENSION:
    case SG_ERR_IO:
    case SG_ERR_NUMERIC:
      return kInputError;
    default:
      return kValidationFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stackelberg game hypergradient benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string out = "-";
  app.add_option("--seed", seed, "Random seed")->capture_default_str();
  app.add_option("--out", out, "CSV destination ('-' for stdout)")->capture_default_str();

  // quadratic
  auto* quad = app.add_subcommand("quadratic", "Timing and accuracy on the quadratic game");
  SolverFlags quad_solver;
  quad_solver.method = "both";
  quad_solver.add(*quad, "backward,forward,both");
  std::vector<std::size_t> dims{2, 4, 8, 16, 32, 64};
  std::size_t repeats = 5;
  quad->add_option("--dims", dims, "Problem dimensions")->delimiter(',')->capture_default_str();
  quad->add_option("--repeats", repeats, "Timed repetitions per point")->check(CLI::PositiveNumber);

  // regression
  auto* reg = app.add_subcommand("regression", "RMSE under attack: ridge vs Nash learner");
  SolverFlags reg_solver;
  DataFlags reg_data;
  reg_solver.add(*reg, "backward,forward");
  reg_data.add(*reg);
  std::vector<double> cd_grid;
  std::vector<std::uint64_t> seeds;
  reg->add_option("--cd-grid", cd_grid, "Attack cost weights c_d")->delimiter(',');
  reg->add_option("--seeds", seeds, "Seeds to average over (default: --seed)")->delimiter(',');

  // convergence
  auto* conv = app.add_subcommand("convergence", "Leader cost paths from random initial points");
  SolverFlags conv_solver;
  DataFlags conv_data;
  conv_solver.add(*conv, "backward,forward");
  conv_data.add(*conv);
  std::size_t inits = 20;
  double conv_cd = 0.5;
  conv->add_option("--inits", inits, "Number of initial points")->check(CLI::PositiveNumber);
  conv->add_option("--cd", conv_cd, "Attack cost weight c_d")->check(CLI::NonNegativeNumber);

  // gradcheck
  auto* check = app.add_subcommand("gradcheck", "Compare backward, forward and finite differences");
  std::string game = "quadratic";
  sg_gradcheck_options gc;
  sg_gradcheck_options_default(&gc);
  check->add_option("--game", game, "Game selector")->check(CLI::IsMember({"quadratic", "regression"}));
  check->add_option("--dim", gc.dim, "Leader dimension")->check(CLI::PositiveNumber);
  check->add_option("--rows", gc.rows, "Regression instances")->check(CLI::PositiveNumber);
  check->add_option("--cd", gc.c_d, "Regression attack cost")->check(CLI::NonNegativeNumber);
  auto* check_steps = check->add_option("--inner-steps", gc.inner_steps, "Follower steps T (regression default 10)")
                          ->check(CLI::PositiveNumber);
  check->add_option("--inner-eta", gc.inner_eta, "Follower step size")->check(CLI::PositiveNumber);
  check->add_option("--tolerance", gc.tolerance, "Forward vs finite differences");
  check->add_option("--exact-tolerance", gc.exact_tolerance, "Exact backward vs forward");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  const char* csv = out.c_str();

  if (*quad) {
    sg_quadratic_options o;
    sg_quadratic_options_default(&o);
    sg_solver_config c;
    sg_solver_config_default(&c);
    quad_solver.apply(c);
    o.dims = dims.data();
    o.dims_len = dims.size();
    o.run_backward = quad_solver.method != "forward";
    o.run_forward = quad_solver.method != "backward";
    o.inner_steps = c.inner_steps;
    o.inner_eta = c.inner_eta;
    o.outer_steps = c.outer_steps;
    o.outer_eta = c.outer_eta;
    o.repeats = repeats;
    o.seed = seed;
    sg_quadratic_summary s;
    if (const sg_status st = sg_run_quadratic(&o, csv, &s); st != SG_OK) return report_status(st);
    std::fprintf(stderr, "quadratic: %zu rows, %zu diverged, max |alpha + 3.5| = %.3e, max |beta + 3.5| = %.3e\n",
                 s.rows, s.error_rows, s.max_alpha_error, s.max_beta_error);
    return kOk;
  }

  if (*reg) {
    sg_regression_options o;
    sg_regression_options_default(&o);
    reg_solver.apply(o.experiment.solver);
    reg_data.apply(o.data, o.experiment);
    if (seeds.empty()) seeds.push_back(seed);
    o.seeds = seeds.data();
    o.seeds_len = seeds.size();
    if (!cd_grid.empty()) {
      o.cd_grid = cd_grid.data();
      o.cd_grid_len = cd_grid.size();
    }
    sg_regression_summary s;
    if (const sg_status st = sg_run_regression(&o, csv, &s); st != SG_OK) return report_status(st);
    std::fprintf(stderr,
                 "regression: %zu rows, %zu with solver errors, max(nash - raw) = %.4f, "
                 "spread raw = %.4f, spread nash = %.4f\n",
                 s.rows, s.error_rows, s.max_nash_minus_raw, s.raw_spread, s.nash_spread);
    return kOk;
  }

  if (*conv) {
    sg_convergence_options o;
    sg_convergence_options_default(&o);
    conv_solver.apply(o.experiment.solver);
    conv_data.apply(o.data, o.experiment);
    o.num_inits = inits;
    o.seed = seed;
    o.c_d = conv_cd;
    sg_convergence_summary s;
    if (const sg_status st = sg_run_convergence(&o, csv, &s); st != SG_OK) return report_status(st);
    const double spread = s.best_final != 0.0 ? (s.worst_final - s.best_final) / s.best_final : 0.0;
    std::fprintf(stderr,
                 "convergence: %zu paths (%zu diverged), %zu epochs, rho = %g, "
                 "final cost best = %.6g worst = %.6g (relative spread %.3e)\n",
                 s.paths, s.failed_paths, s.epochs, s.rho, s.best_final, s.worst_final, spread);
    return kOk;
  }

  // gradcheck
  gc.game = game == "regression" ? SG_GAME_REGRESSION : SG_GAME_QUADRATIC;
  // Short unrolls keep the regression adjoint gap in its asymptotic regime.
  if (gc.game == SG_GAME_REGRESSION && check_steps->count() == 0) gc.inner_steps = 10;
  gc.seed = seed;
  sg_gradcheck_report r;
  if (const sg_status st = sg_run_gradcheck(&gc, &r); st != SG_OK) return report_status(st);
  std::printf("forward vs finite differences     %.3e  (tol %.1e)  %s\n", r.fd_vs_forward,
              gc.tolerance, r.fd_ok ? "ok" : "FAIL");
  std::printf("exact backward vs forward         %.3e  (tol %.1e)  %s\n",
              r.exact_backward_vs_forward, gc.exact_tolerance, r.exact_ok ? "ok" : "FAIL");
  for (int i = 0; i < 3; ++i) {
    std::printf("adjoint backward vs forward, eta=%-8g %.3e\n", r.etas[i], r.faithful_gaps[i]);
  }
  std::printf("adjoint gap shrinks with eta      %s\n", r.gap_ok ? "ok" : "FAIL");
  const bool passed = r.fd_ok && r.exact_ok && r.gap_ok;
  if (!passed) {
    std::fprintf(stderr, "gradcheck failed:%s%s%s\n", r.fd_ok ? "" : " fd-vs-forward",
                 r.exact_ok ? "" : " backward-vs-forward", r.gap_ok ? "" : " adjoint-gap");
  }
  return passed ? kOk : kValidationFailure;
}
