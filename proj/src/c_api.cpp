#include "stackelberg/stackelberg.h"

#include "adversarial_regression.hpp"
#include "bench.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "solvers.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <limits>
#include <new>
#include <optional>
#include <stdexcept>
#include <string>

struct sg_game {
  sg::DifferentiableGame game;
};

struct sg_dataset {
  sg::Dataset data;
};

struct sg_solution {
  sg::SolutionReport report;
};

namespace {

thread_local std::string last_error;

sg_status fail(sg_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs `body`, translating exceptions into status codes.
template <class F>
sg_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return SG_OK;
  } catch (const sg::DimensionError& e) {
    return fail(SG_ERR_DIMENSION, e.what());
  } catch (const sg::DivergenceError& e) {
    return fail(SG_ERR_DIVERGENCE, e.what());
  } catch (const sg::IoError& e) {
    return fail(SG_ERR_IO, e.what());
  } catch (const sg::NumericError& e) {
    return fail(SG_ERR_NUMERIC, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(SG_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SG_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SG_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SG_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Eigen::VectorXd vec(const double* p, std::size_t n) {
  return Eigen::Map<const Eigen::VectorXd>(p, static_cast<Eigen::Index>(n));
}

void copy_out(const Eigen::VectorXd& v, double* out, std::size_t len) {
  require(out != nullptr, "null output buffer");
  if (len < static_cast<std::size_t>(v.size())) {
    throw sg::DimensionError("output buffer holds " + std::to_string(len) + " values, " +
                             std::to_string(v.size()) + " needed");
  }
  std::copy(v.begin(), v.end(), out);
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::MatrixXd matrix(const double* p, std::size_t k, std::size_t cols) {
  return Eigen::Map<const RowMatrix>(p, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
}

sg::SolverConfig to_config(const sg_solver_config* c) {
  require(c != nullptr, "null solver config");
  sg::SolverConfig cfg;
  cfg.inner_steps = c->inner_steps;
  cfg.inner_eta = c->inner_eta;
  cfg.outer_steps = c->outer_steps;
  cfg.outer_eta = c->outer_eta;
  require(c->method == SG_METHOD_BACKWARD || c->method == SG_METHOD_FORWARD, "unknown method");
  cfg.method = c->method == SG_METHOD_FORWARD ? sg::HypergradientMethod::Forward
                                              : sg::HypergradientMethod::Backward;
  require(c->hessian_point == SG_HESSIAN_NEXT_ITERATE ||
              c->hessian_point == SG_HESSIAN_CURRENT_ITERATE,
          "unknown hessian point");
  cfg.hessian_point = c->hessian_point == SG_HESSIAN_CURRENT_ITERATE
                          ? sg::HessianPoint::CurrentIterate
                          : sg::HessianPoint::NextIterate;
  cfg.convergence_warn_tol = c->convergence_warn_tol;
  if (c->alpha0) cfg.alpha0 = vec(c->alpha0, c->alpha0_len);
  if (c->beta0) cfg.beta0 = vec(c->beta0, c->beta0_len);
  return cfg;
}

void from_config(const sg::SolverConfig& cfg, sg_solver_config* c) {
  c->inner_steps = cfg.inner_steps;
  c->inner_eta = cfg.inner_eta;
  c->outer_steps = cfg.outer_steps;
  c->outer_eta = cfg.outer_eta;
  c->method = cfg.method == sg::HypergradientMethod::Forward ? SG_METHOD_FORWARD : SG_METHOD_BACKWARD;
  c->hessian_point = cfg.hessian_point == sg::HessianPoint::CurrentIterate
                         ? SG_HESSIAN_CURRENT_ITERATE
                         : SG_HESSIAN_NEXT_ITERATE;
  c->convergence_warn_tol = cfg.convergence_warn_tol;
  c->alpha0 = nullptr;
  c->alpha0_len = 0;
  c->beta0 = nullptr;
  c->beta0_len = 0;
}

sg::bench::DataSource to_source(const sg_data_source& s) {
  sg::bench::DataSource d;
  if (s.wine_csv) d.wine_csv = s.wine_csv;
  d.synthetic_rows = s.synthetic_rows;
  d.synthetic_features = s.synthetic_features;
  d.synthetic_noise = s.synthetic_noise;
  d.subsample = s.subsample;
  return d;
}

sg::RegressionExperimentConfig to_experiment(const sg_experiment_config& c) {
  sg::RegressionExperimentConfig e;
  if (c.rho_grid) e.rho_grid.assign(c.rho_grid, c.rho_grid + c.rho_grid_len);
  e.holdout_repetitions = c.holdout_repetitions;
  e.train_fraction = c.train_fraction;
  e.pca_components = c.pca_components;
  e.c_l = c.c_l;
  e.solver = to_config(&c.solver);
  return e;
}

template <class Write>
void with_output(const char* path, Write&& write) {
  if (path == nullptr) return;
  const std::string p(path);
  if (p == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(p);
  if (!out) throw sg::IoError("cannot open output file '" + p + "'");
  write(out);
  if (!out) throw sg::IoError("failed writing output file '" + p + "'");
}

const sg::DifferentiableGame& game_of(const sg_game* g) {
  require(g != nullptr, "null game handle");
  return g->game;
}

const sg::Dataset& data_of(const sg_dataset* d) {
  require(d != nullptr, "null dataset handle");
  return d->data;
}

const sg::SolutionReport& report_of(const sg_solution* s) {
  require(s != nullptr, "null solution handle");
  return s->report;
}

}  // namespace

extern "C" {

const char* sg_last_error(void) { return last_error.c_str(); }

const char* sg_status_string(sg_status status) {
  switch (status) {
    case SG_OK: return "ok";
    case SG_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SG_ERR_DIMENSION: return "dimension mismatch";
    case SG_ERR_DIVERGENCE: return "divergence";
    case SG_ERR_IO: return "i/o error";
    case SG_ERR_NUMERIC: return "numeric error";
    case SG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* sg_version(void) { return "1.0.0"; }

void sg_solver_config_default(sg_solver_config* config) {
  if (config) from_config(sg::SolverConfig{}, config);
}

void sg_solver_config_regression_default(sg_solver_config* config) {
  if (config) from_config(sg::regression_solver_defaults(), config);
}

// ----------------------------------------------------------------- games

sg_status sg_game_quadratic(size_t n, sg_game** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new sg_game{sg::quadratic_game(n)};
  });
}

sg_status sg_game_regression(const sg_dataset* train, double c_d, double c_l, double rho,
                             sg_game** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    const sg::Dataset& d = data_of(train);
    sg::RegressionGameSpec spec;
    spec.X = d.X;
    spec.y = d.y;
    spec.c_d = c_d;
    spec.c_l = c_l;
    spec.rho = rho;
    *out = new sg_game{sg::regression_game(spec)};
  });
}

void sg_game_free(sg_game* game) { delete game; }

sg_status sg_game_dims(const sg_game* game, size_t* n, size_t* m) {
  return guarded([&] {
    const auto& g = game_of(game);
    if (n) *n = g.n();
    if (m) *m = g.m();
  });
}

sg_status sg_game_evaluate(const sg_game* game, const double* alpha, const double* beta,
                           double* leader, double* follower) {
  return guarded([&] {
    const auto& g = game_of(game);
    require(alpha && beta, "null input vector");
    const sg::ObjectivePair v = sg::evaluate_pair(g, vec(alpha, g.n()), vec(beta, g.m()));
    if (leader) *leader = v.leader;
    if (follower) *follower = v.follower;
  });
}

sg_status sg_hypergradient(const sg_game* game, const double* alpha, const sg_solver_config* config,
                           double* grad_out, double* beta_out, sg_hypergradient_info* info) {
  return guarded([&] {
    const auto& g = game_of(game);
    require(alpha != nullptr, "null alpha");
    const sg::HypergradientReport r = sg::hypergradient(g, vec(alpha, g.n()), to_config(config));
    copy_out(r.grad, grad_out, g.n());
    if (beta_out) copy_out(r.beta_T, beta_out, g.m());
    if (info) {
      info->leader_value = r.leader_value;
      info->inner_residual = r.inner_residual;
      info->wall_time = r.wall_time;
      info->peak_trace_length = r.peak_trace_length;
      info->not_converged = r.warning ? 1 : 0;
    }
  });
}

sg_status sg_fd_hypergradient(const sg_game* game, const double* alpha,
                              const sg_solver_config* config, double h, double* grad_out) {
  return guarded([&] {
    const auto& g = game_of(game);
    require(alpha != nullptr, "null alpha");
    copy_out(sg::fd_hypergradient(g, vec(alpha, g.n()), to_config(config), h), grad_out, g.n());
  });
}

sg_status sg_inner_ascent(const sg_game* game, const double* alpha, const sg_solver_config* config,
                          double* beta_out) {
  return guarded([&] {
    const auto& g = game_of(game);
    require(alpha != nullptr, "null alpha");
    sg::SolverConfig cfg = to_config(config);
    cfg.validate(g.n(), g.m());
    const Eigen::VectorXd beta0 =
        cfg.beta0.size() ? cfg.beta0 : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(g.m()));
    const auto trace = sg::inner_ascent(g, vec(alpha, g.n()), cfg.inner_steps, cfg.inner_eta, beta0);
    copy_out(trace.back(), beta_out, g.m());
  });
}

sg_status sg_solve(const sg_game* game, const sg_solver_config* config, sg_solution** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new sg_solution{sg::solve_stackelberg(game_of(game), to_config(config))};
  });
}

void sg_solution_free(sg_solution* solution) { delete solution; }

size_t sg_solution_alpha_dim(const sg_solution* s) {
  return s ? static_cast<size_t>(s->report.final_alpha.size()) : 0;
}

size_t sg_solution_beta_dim(const sg_solution* s) {
  return s ? static_cast<size_t>(s->report.final_beta.size()) : 0;
}

size_t sg_solution_epochs(const sg_solution* s) { return s ? s->report.alpha_path.size() : 0; }

sg_status sg_solution_final_alpha(const sg_solution* s, double* out, size_t len) {
  return guarded([&] { copy_out(report_of(s).final_alpha, out, len); });
}

sg_status sg_solution_final_beta(const sg_solution* s, double* out, size_t len) {
  return guarded([&] { copy_out(report_of(s).final_beta, out, len); });
}

sg_status sg_solution_leader_path(const sg_solution* s, double* out, size_t len) {
  return guarded([&] {
    const auto& p = report_of(s).leader_objective_path;
    copy_out(vec(p.data(), p.size()), out, len);
  });
}

sg_status sg_solution_gradient_norms(const sg_solution* s, double* out, size_t len) {
  return guarded([&] {
    const auto& p = report_of(s).gradient_norm_path;
    copy_out(vec(p.data(), p.size()), out, len);
  });
}

double sg_solution_wall_time(const sg_solution* s) { return s ? s->report.total_wall_time : 0.0; }

size_t sg_solution_peak_trace_length(const sg_solution* s) {
  return s ? s->report.peak_trace_length : 0;
}

const char* sg_solution_error(const sg_solution* s) {
  return s && s->report.error ? s->report.error->c_str() : nullptr;
}

// -------------------------------------------------------------- datasets

sg_status sg_dataset_load_wine(const char* path, sg_dataset** out) {
  return guarded([&] {
    require(path && out, "null argument");
    *out = new sg_dataset{sg::load_wine_csv(path)};
  });
}

sg_status sg_dataset_synthetic(uint64_t seed, size_t k, size_t p, double noise_std,
                               sg_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new sg_dataset{sg::synth_dataset(seed, k, p, noise_std)};
  });
}

sg_status sg_dataset_from_arrays(const double* X, const double* y, size_t k, size_t p,
                                 sg_dataset** out) {
  return guarded([&] {
    require(X && y && out, "null argument");
    require(k >= 1 && p >= 1, "dataset needs k, p >= 1");
    sg::Dataset d;
    d.X = matrix(X, k, p);
    d.y = vec(y, k);
    d.validate();
    *out = new sg_dataset{std::move(d)};
  });
}

void sg_dataset_free(sg_dataset* data) { delete data; }

size_t sg_dataset_rows(const sg_dataset* d) { return d ? d->data.rows() : 0; }
size_t sg_dataset_cols(const sg_dataset* d) { return d ? d->data.cols() : 0; }
size_t sg_dataset_rejected_rows(const sg_dataset* d) { return d ? d->data.rejected_rows : 0; }

sg_status sg_dataset_copy_X(const sg_dataset* d, double* out, size_t len) {
  return guarded([&] { copy_out(sg::flatten_rows(data_of(d).X), out, len); });
}

sg_status sg_dataset_copy_y(const sg_dataset* d, double* out, size_t len) {
  return guarded([&] { copy_out(data_of(d).y, out, len); });
}

// ------------------------------------------------------------ regression

sg_status sg_ridge_fit(const sg_dataset* data, double rho, double* w_out) {
  return guarded([&] {
    const auto& d = data_of(data);
    copy_out(sg::ridge_fit(d.X, d.y, rho), w_out, d.cols());
  });
}

sg_status sg_attacker_closed_form(const double* X, size_t k, size_t p, const double* w, double c_d,
                                  double* Xbar_out) {
  return guarded([&] {
    require(X && w, "null input");
    const Eigen::MatrixXd Xbar = sg::attacker_closed_form(matrix(X, k, p), vec(w, p), c_d);
    copy_out(sg::flatten_rows(Xbar), Xbar_out, k * p);
  });
}

sg_status sg_evaluate_under_attack(const double* w, size_t p, const sg_dataset* test, double c_d,
                                   double* rmse_out) {
  return guarded([&] {
    require(w && rmse_out, "null argument");
    *rmse_out = sg::evaluate_under_attack(vec(w, p), data_of(test), c_d);
  });
}

sg_status sg_nash_train(const sg_dataset* train, double c_d, const sg_solver_config* config,
                        double rho, double c_l, double* w_out, sg_solution** solution_out) {
  return guarded([&] {
    const auto& d = data_of(train);
    sg::NashResult r = sg::nash_train(d, c_d, to_config(config), rho, c_l);
    copy_out(r.w, w_out, d.cols());
    if (solution_out) *solution_out = new sg_solution{std::move(r.solution)};
  });
}

// ----------------------------------------------------------- experiments

void sg_quadratic_options_default(sg_quadratic_options* o) {
  if (!o) return;
  static const size_t dims[] = {2, 4, 8, 16, 32, 64};
  const sg::bench::QuadraticOptions d;
  o->dims = dims;
  o->dims_len = sizeof dims / sizeof dims[0];
  o->run_backward = 1;
  o->run_forward = 1;
  o->inner_steps = d.inner_steps;
  o->inner_eta = d.inner_eta;
  o->outer_steps = d.outer_steps;
  o->outer_eta = d.outer_eta;
  o->repeats = d.repeats;
  o->seed = d.seed;
}

sg_status sg_run_quadratic(const sg_quadratic_options* o, const char* csv_out,
                           sg_quadratic_summary* summary) {
  return guarded([&] {
    require(o != nullptr, "null options");
    require(o->dims || o->dims_len == 0, "null dims");
    sg::bench::QuadraticOptions opt;
    opt.dims.assign(o->dims, o->dims + o->dims_len);
    opt.methods.clear();
    if (o->run_backward) opt.methods.push_back(sg::HypergradientMethod::Backward);
    if (o->run_forward) opt.methods.push_back(sg::HypergradientMethod::Forward);
    opt.inner_steps = o->inner_steps;
    opt.inner_eta = o->inner_eta;
    opt.outer_steps = o->outer_steps;
    opt.outer_eta = o->outer_eta;
    opt.repeats = o->repeats;
    opt.seed = o->seed;

    const auto rows = sg::bench::run_quadratic(opt);
    with_output(csv_out, [&](std::ostream& out) {
      sg::bench::write_csv(out, sg::bench::quadratic_columns(), sg::bench::quadratic_records(opt, rows));
    });
    if (summary) {
      *summary = {};
      for (const auto& r : rows) {
        ++summary->rows;
        if (r.error) {
          ++summary->error_rows;
          continue;
        }
        summary->max_alpha_error = std::max(summary->max_alpha_error, r.alpha_max_abs_error);
        summary->max_beta_error = std::max(summary->max_beta_error, r.beta_max_abs_error);
      }
    }
  });
}

void sg_data_source_default(sg_data_source* s) {
  if (!s) return;
  const sg::bench::DataSource d;
  s->wine_csv = nullptr;
  s->synthetic_rows = d.synthetic_rows;
  s->synthetic_features = d.synthetic_features;
  s->synthetic_noise = d.synthetic_noise;
  s->subsample = d.subsample;
}

void sg_experiment_config_default(sg_experiment_config* c) {
  if (!c) return;
  const sg::RegressionExperimentConfig d;
  c->rho_grid = nullptr;
  c->rho_grid_len = 0;
  c->holdout_repetitions = d.holdout_repetitions;
  c->train_fraction = d.train_fraction;
  c->pca_components = d.pca_components;
  c->c_l = d.c_l;
  from_config(d.solver, &c->solver);
}

void sg_regression_options_default(sg_regression_options* o) {
  if (!o) return;
  sg_data_source_default(&o->data);
  sg_experiment_config_default(&o->experiment);
  o->cd_grid = nullptr;
  o->cd_grid_len = 0;
  o->seeds = nullptr;
  o->seeds_len = 0;
}

sg_status sg_run_regression(const sg_regression_options* o, const char* csv_out,
                            sg_regression_summary* summary) {
  return guarded([&] {
    require(o != nullptr, "null options");
    sg::bench::RegressionOptions opt;
    opt.data = to_source(o->data);
    opt.experiment = to_experiment(o->experiment);
    if (o->cd_grid) opt.cd_grid.assign(o->cd_grid, o->cd_grid + o->cd_grid_len);
    if (o->seeds) opt.seeds.assign(o->seeds, o->seeds + o->seeds_len);

    const auto results = sg::bench::run_regression(opt);
    with_output(csv_out, [&](std::ostream& out) {
      sg::bench::write_csv(out, sg::bench::regression_columns(),
                           sg::bench::regression_records(opt, results));
    });
    if (summary) {
      *summary = {};
      summary->rows = results.size();
      summary->max_nash_minus_raw = -std::numeric_limits<double>::infinity();
      double raw_lo = std::numeric_limits<double>::infinity(), raw_hi = -raw_lo;
      double nash_lo = raw_lo, nash_hi = -raw_lo;
      for (double c_d : opt.cd_grid) {
        double raw = 0.0, nash = 0.0, count = 0.0;
        for (const auto& e : results) {
          if (e.error && e.c_d == c_d) ++summary->error_rows;
          if (e.c_d != c_d) continue;
          raw += e.rmse_raw;
          nash += e.rmse_nash;
          count += 1.0;
        }
        raw /= count;
        nash /= count;
        summary->max_nash_minus_raw = std::max(summary->max_nash_minus_raw, nash - raw);
        raw_lo = std::min(raw_lo, raw);
        raw_hi = std::max(raw_hi, raw);
        nash_lo = std::min(nash_lo, nash);
        nash_hi = std::max(nash_hi, nash);
      }
      summary->raw_spread = raw_hi - raw_lo;
      summary->nash_spread = nash_hi - nash_lo;
    }
  });
}

void sg_convergence_options_default(sg_convergence_options* o) {
  if (!o) return;
  const sg::bench::ConvergenceOptions d;
  sg_data_source_default(&o->data);
  sg_experiment_config_default(&o->experiment);
  o->num_inits = d.num_inits;
  o->seed = d.seed;
  o->c_d = d.c_d;
}

sg_status sg_run_convergence(const sg_convergence_options* o, const char* csv_out,
                             sg_convergence_summary* summary) {
  return guarded([&] {
    require(o != nullptr, "null options");
    sg::bench::ConvergenceOptions opt;
    opt.data = to_source(o->data);
    opt.experiment = to_experiment(o->experiment);
    opt.num_inits = o->num_inits;
    opt.seed = o->seed;
    opt.c_d = o->c_d;

    const auto result = sg::bench::run_convergence(opt);
    with_output(csv_out, [&](std::ostream& out) { sg::bench::write_convergence_csv(out, result); });
    if (summary) {
      *summary = {};
      summary->paths = result.paths.size();
      for (std::size_t i = 0; i < result.paths.size(); ++i) {
        if (result.errors[i]) ++summary->failed_paths;
        summary->epochs = std::max(summary->epochs, result.paths[i].size());
      }
      summary->rho = result.rho;
      summary->best_final = result.best_final;
      summary->worst_final = result.worst_final;
    }
  });
}

void sg_gradcheck_options_default(sg_gradcheck_options* o) {
  if (!o) return;
  const sg::bench::GradcheckOptions d;
  o->game = SG_GAME_QUADRATIC;
  o->dim = d.dim;
  o->rows = d.rows;
  o->c_d = d.c_d;
  o->inner_steps = d.inner_steps;
  o->inner_eta = d.inner_eta;
  o->tolerance = d.tolerance;
  o->exact_tolerance = d.exact_tolerance;
  o->seed = d.seed;
}

sg_status sg_run_gradcheck(const sg_gradcheck_options* o, sg_gradcheck_report* report) {
  return guarded([&] {
    require(o && report, "null argument");
    require(o->game == SG_GAME_QUADRATIC || o->game == SG_GAME_REGRESSION, "unknown game");
    sg::bench::GradcheckOptions opt;
    opt.game = o->game == SG_GAME_REGRESSION ? sg::bench::GameSelector::Regression
                                             : sg::bench::GameSelector::Quadratic;
    opt.dim = o->dim;
    opt.rows = o->rows;
    opt.c_d = o->c_d;
    opt.inner_steps = o->inner_steps;
    opt.inner_eta = o->inner_eta;
    opt.tolerance = o->tolerance;
    opt.exact_tolerance = o->exact_tolerance;
    opt.seed = o->seed;

    const auto r = sg::bench::run_gradcheck(opt);
    report->fd_vs_forward = r.fd_vs_forward;
    report->exact_backward_vs_forward = r.exact_backward_vs_forward;
    for (std::size_t i = 0; i < 3; ++i) {
      report->etas[i] = r.etas.at(i);
      report->faithful_gaps[i] = r.faithful_gaps.at(i);
    }
    report->fd_ok = r.fd_ok;
    report->exact_ok = r.exact_ok;
    report->gap_ok = r.gap_ok;
  });
}

}  // extern "C"
