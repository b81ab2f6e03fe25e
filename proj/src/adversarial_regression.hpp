#pragma once

#include "dataset.hpp"
#include "solvers.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sg {

/// Principal axes of a training matrix (centered with its own means).
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd axes;      // p x components, orthonormal columns
  Eigen::VectorXd variance;  // per retained axis, descending
  std::size_t rank = 0;      // numerical rank of the training covariance

  Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& scores) const;
};

/// Throws NumericError naming the achieved rank when the training data
/// cannot supply `components` directions.
PcaModel fit_pca(const Eigen::MatrixXd& train_X, std::size_t components);

struct PcaPair {
  Eigen::MatrixXd train;
  Eigen::MatrixXd other;
};
PcaPair pca_transform(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& other_X,
                      std::size_t components);

/// w = argmin |Xw - y|^2 + rho |w|^2, solved by QR on the augmented system
/// [X; sqrt(rho) I] w = [y; 0]. Throws NumericError when rank deficient.
Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double rho);

double rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w);

struct HoldoutRow {
  double rho = 0.0;
  double mean_rmse = 0.0;
};

struct HoldoutResult {
  double best_rho = 0.0;
  std::vector<HoldoutRow> table;
};

/// Mean validation RMSE of ridge over `repetitions` random splits for each
/// rho; the smallest mean wins, ties go to the larger rho.
HoldoutResult repeated_holdout_select(const Dataset& data, const std::vector<double>& rho_grid,
                                      std::size_t repetitions, double split_fraction,
                                      std::uint64_t seed);

/// Unique minimizer of c_d sum_i (xbar_i.w - z)^2 + |X - Xbar|_F^2:
/// xbar_i = x_i - c_d (w.x_i - z) / (1 + c_d |w|^2) * w.
Eigen::MatrixXd attacker_closed_form(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                                     double c_d, double z = 0.0);

/// RMSE of w on test data after the follower's best response to w.
double evaluate_under_attack(const Eigen::VectorXd& w, const Dataset& test, double c_d);

struct NashResult {
  Eigen::VectorXd w;
  SolutionReport solution;
};

/// Leader weights of the adversarial regression game on `train`. The
/// follower starts from the clean data unless config.beta0 is set.
NashResult nash_train(const Dataset& train, double c_d, const SolverConfig& config, double rho,
                      double c_l = 1.0);

/// Default outer/inner settings of the wine experiment.
SolverConfig regression_solver_defaults();

/// 7-point log grid 1e-3 .. 1e3.
std::vector<double> default_rho_grid();

/// {0, 0.01, 0.05, 0.1, 0.5, 1}.
std::vector<double> default_cd_grid();

struct RegressionExperimentConfig {
  std::vector<double> rho_grid = default_rho_grid();
  std::size_t holdout_repetitions = 10;
  double holdout_fraction = 2.0 / 3.0;
  double train_fraction = 2.0 / 3.0;
  std::size_t pca_components = 0;  // 0: all features
  double c_l = 1.0;
  SolverConfig solver = regression_solver_defaults();
};

struct ExperimentResult {
  double c_d = 0.0;
  std::uint64_t seed = 0;
  double rho = 0.0;
  double rmse_raw = 0.0;
  double rmse_nash = 0.0;
  double seconds_per_outer_epoch = 0.0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t features = 0;
  std::optional<std::string> error;
};

struct PreparedData {
  Dataset train;
  Dataset test;
  double rho = 0.0;
};

/// Split, standardize, rotate onto principal axes and choose rho by
/// repeated hold-out on the training part.
PreparedData prepare_regression_data(const Dataset& data, const RegressionExperimentConfig& config,
                                     std::uint64_t seed);

/// Trains the raw ridge and Nash learners and scores both on the attacked
/// test split.
ExperimentResult run_regression_experiment(const PreparedData& prepared, double c_d,
                                           const RegressionExperimentConfig& config,
                                           std::uint64_t seed);

}  // namespace sg
