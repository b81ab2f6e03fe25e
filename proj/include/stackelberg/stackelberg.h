#ifndef STACKELBERG_STACKELBERG_H
#define STACKELBERG_STACKELBERG_H

/*
 * C interface to the Stackelberg game solver.
 *
 * Objects are opaque handles released with the matching *_free function.
 * Every fallible call returns an sg_status; on failure a message for the
 * calling thread is available from sg_last_error() until the next call.
 * Matrices are dense and row-major. Output arrays are caller-allocated.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SG_BUILDING_LIBRARY)
#    define SG_API __declspec(dllexport)
#  else
#    define SG_API __declspec(dllimport)
#  endif
#else
#  define SG_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sg_status {
  SG_OK = 0,
  SG_ERR_INVALID_ARGUMENT = 1,
  SG_ERR_DIMENSION = 2,
  SG_ERR_DIVERGENCE = 3,
  SG_ERR_IO = 4,
  SG_ERR_NUMERIC = 5,
  SG_ERR_INTERNAL = 6
} sg_status;

typedef enum sg_method { SG_METHOD_BACKWARD = 0, SG_METHOD_FORWARD = 1 } sg_method;

/* Where the backward method evaluates second derivatives. */
typedef enum sg_hessian_point {
  SG_HESSIAN_NEXT_ITERATE = 0,   /* adjoint discretization, the default */
  SG_HESSIAN_CURRENT_ITERATE = 1 /* exact reverse mode of the unrolled loop */
} sg_hessian_point;

typedef struct sg_game sg_game;
typedef struct sg_dataset sg_dataset;
typedef struct sg_solution sg_solution;

SG_API const char* sg_last_error(void);
SG_API const char* sg_status_string(sg_status status);
SG_API const char* sg_version(void);

/* ------------------------------------------------------------ solver */

typedef struct sg_solver_config {
  size_t inner_steps;
  double inner_eta;
  size_t outer_steps;
  double outer_eta;
  sg_method method;
  sg_hessian_point hessian_point;
  double convergence_warn_tol;
  const double* alpha0; /* NULL: zero start */
  size_t alpha0_len;
  const double* beta0; /* NULL: zero start (clean data for nash training) */
  size_t beta0_len;
} sg_solver_config;

/* T = 40, eta = 0.1 in both loops, backward method. */
SG_API void sg_solver_config_default(sg_solver_config* config);
/* T = 100, eta = 0.01, 350 outer epochs at 1e-6, backward method. */
SG_API void sg_solver_config_regression_default(sg_solver_config* config);

/* ------------------------------------------------------------- games */

SG_API sg_status sg_game_quadratic(size_t n, sg_game** out);
/* Adversarial ridge regression game on the rows of `train`. */
SG_API sg_status sg_game_regression(const sg_dataset* train, double c_d, double c_l, double rho,
                                    sg_game** out);
SG_API void sg_game_free(sg_game* game);

SG_API sg_status sg_game_dims(const sg_game* game, size_t* n, size_t* m);
/* Either output may be NULL. */
SG_API sg_status sg_game_evaluate(const sg_game* game, const double* alpha, const double* beta,
                                  double* leader, double* follower);

typedef struct sg_hypergradient_info {
  double leader_value;
  double inner_residual;
  double wall_time;
  size_t peak_trace_length;
  int not_converged; /* inner residual above convergence_warn_tol */
} sg_hypergradient_info;

/* grad_out has n entries, beta_out (nullable) m entries. */
SG_API sg_status sg_hypergradient(const sg_game* game, const double* alpha,
                                  const sg_solver_config* config, double* grad_out,
                                  double* beta_out, sg_hypergradient_info* info);
SG_API sg_status sg_fd_hypergradient(const sg_game* game, const double* alpha,
                                     const sg_solver_config* config, double h, double* grad_out);
/* Final follower iterate after config->inner_steps steps. */
SG_API sg_status sg_inner_ascent(const sg_game* game, const double* alpha,
                                 const sg_solver_config* config, double* beta_out);

/* A diverging outer loop still yields a solution; see sg_solution_error. */
SG_API sg_status sg_solve(const sg_game* game, const sg_solver_config* config, sg_solution** out);
SG_API void sg_solution_free(sg_solution* solution);

SG_API size_t sg_solution_alpha_dim(const sg_solution* solution);
SG_API size_t sg_solution_beta_dim(const sg_solution* solution);
/* Number of recorded outer iterates (outer_steps + 1 unless diverged). */
SG_API size_t sg_solution_epochs(const sg_solution* solution);
SG_API sg_status sg_solution_final_alpha(const sg_solution* solution, double* out, size_t len);
SG_API sg_status sg_solution_final_beta(const sg_solution* solution, double* out, size_t len);
SG_API sg_status sg_solution_leader_path(const sg_solution* solution, double* out, size_t len);
SG_API sg_status sg_solution_gradient_norms(const sg_solution* solution, double* out, size_t len);
SG_API double sg_solution_wall_time(const sg_solution* solution);
SG_API size_t sg_solution_peak_trace_length(const sg_solution* solution);
/* NULL when the run completed. */
SG_API const char* sg_solution_error(const sg_solution* solution);

/* ---------------------------------------------------------- datasets */

SG_API sg_status sg_dataset_load_wine(const char* path, sg_dataset** out);
SG_API sg_status sg_dataset_synthetic(uint64_t seed, size_t k, size_t p, double noise_std,
                                      sg_dataset** out);
SG_API sg_status sg_dataset_from_arrays(const double* X, const double* y, size_t k, size_t p,
                                        sg_dataset** out);
SG_API void sg_dataset_free(sg_dataset* data);

SG_API size_t sg_dataset_rows(const sg_dataset* data);
SG_API size_t sg_dataset_cols(const sg_dataset* data);
SG_API size_t sg_dataset_rejected_rows(const sg_dataset* data);
SG_API sg_status sg_dataset_copy_X(const sg_dataset* data, double* out, size_t len);
SG_API sg_status sg_dataset_copy_y(const sg_dataset* data, double* out, size_t len);

/* ---------------------------------------------------------- regression */

SG_API sg_status sg_ridge_fit(const sg_dataset* data, double rho, double* w_out);
/* Follower best response: X and Xbar_out are k x p. */
SG_API sg_status sg_attacker_closed_form(const double* X, size_t k, size_t p, const double* w,
                                         double c_d, double* Xbar_out);
SG_API sg_status sg_evaluate_under_attack(const double* w, size_t p, const sg_dataset* test,
                                          double c_d, double* rmse_out);
/* solution_out may be NULL. */
SG_API sg_status sg_nash_train(const sg_dataset* train, double c_d, const sg_solver_config* config,
                               double rho, double c_l, double* w_out, sg_solution** solution_out);

/* ---------------------------------------------------------- experiments */

/* CSV destinations: a file path, or "-" for standard output. */

typedef struct sg_quadratic_options {
  const size_t* dims;
  size_t dims_len;
  int run_backward;
  int run_forward;
  size_t inner_steps;
  double inner_eta;
  size_t outer_steps;
  double outer_eta;
  size_t repeats;
  uint64_t seed;
} sg_quadratic_options;

typedef struct sg_quadratic_summary {
  double max_alpha_error;
  double max_beta_error;
  size_t rows;
  size_t error_rows;
} sg_quadratic_summary;

SG_API void sg_quadratic_options_default(sg_quadratic_options* options);
SG_API sg_status sg_run_quadratic(const sg_quadratic_options* options, const char* csv_out,
                                  sg_quadratic_summary* summary);

typedef struct sg_data_source {
  const char* wine_csv; /* NULL: synthetic data */
  size_t synthetic_rows;
  size_t synthetic_features;
  double synthetic_noise;
  size_t subsample; /* 0: all rows */
} sg_data_source;

typedef struct sg_experiment_config {
  const double* rho_grid; /* NULL: default 7-point grid */
  size_t rho_grid_len;
  size_t holdout_repetitions;
  double train_fraction;
  size_t pca_components; /* 0: all features */
  double c_l;
  sg_solver_config solver;
} sg_experiment_config;

SG_API void sg_data_source_default(sg_data_source* source);
SG_API void sg_experiment_config_default(sg_experiment_config* config);

typedef struct sg_regression_options {
  sg_data_source data;
  sg_experiment_config experiment;
  const double* cd_grid; /* NULL: default grid */
  size_t cd_grid_len;
  const uint64_t* seeds;
  size_t seeds_len;
} sg_regression_options;

typedef struct sg_regression_summary {
  size_t rows;
  size_t error_rows;
  double max_nash_minus_raw; /* over per-c_d means */
  double raw_spread;         /* max - min of mean rmse_raw over the grid */
  double nash_spread;
} sg_regression_summary;

SG_API void sg_regression_options_default(sg_regression_options* options);
SG_API sg_status sg_run_regression(const sg_regression_options* options, const char* csv_out,
                                   sg_regression_summary* summary);

typedef struct sg_convergence_options {
  sg_data_source data;
  sg_experiment_config experiment;
  size_t num_inits;
  uint64_t seed;
  double c_d;
} sg_convergence_options;

typedef struct sg_convergence_summary {
  size_t paths;
  size_t failed_paths;
  size_t epochs;
  double rho;
  double best_final;
  double worst_final;
} sg_convergence_summary;

SG_API void sg_convergence_options_default(sg_convergence_options* options);
SG_API sg_status sg_run_convergence(const sg_convergence_options* options, const char* csv_out,
                                    sg_convergence_summary* summary);

typedef enum sg_game_kind { SG_GAME_QUADRATIC = 0, SG_GAME_REGRESSION = 1 } sg_game_kind;

typedef struct sg_gradcheck_options {
  sg_game_kind game;
  size_t dim;
  size_t rows;
  double c_d;
  size_t inner_steps;
  double inner_eta;
  double tolerance;
  double exact_tolerance;
  uint64_t seed;
} sg_gradcheck_options;

typedef struct sg_gradcheck_report {
  double fd_vs_forward;
  double exact_backward_vs_forward;
  double etas[3];
  double faithful_gaps[3];
  int fd_ok;
  int exact_ok;
  int gap_ok;
} sg_gradcheck_report;

SG_API void sg_gradcheck_options_default(sg_gradcheck_options* options);
SG_API sg_status sg_run_gradcheck(const sg_gradcheck_options* options, sg_gradcheck_report* report);

#ifdef __cplusplus
}
#endif

#endif /* STACKELBERG_STACKELBERG_H */
