#include "adversarial_regression.hpp"

#include "errors.hpp"
#include "game.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace sg {

Eigen::MatrixXd PcaModel::transform(const Eigen::MatrixXd& X) const {
  if (X.cols() != mean.size()) throw DimensionError("pca: column count mismatch");
  return (X.rowwise() - mean.transpose()) * axes;
}

Eigen::MatrixXd PcaModel::reconstruct(const Eigen::MatrixXd& scores) const {
  if (scores.cols() != axes.cols()) throw DimensionError("pca: score column mismatch");
  return (scores * axes.transpose()).rowwise() + mean.transpose();
}

PcaModel fit_pca(const Eigen::MatrixXd& train_X, std::size_t components) {
  const auto p = static_cast<std::size_t>(train_X.cols());
  if (components == 0 || components > p) {
    throw std::invalid_argument("pca: components must lie in [1, " + std::to_string(p) + "]");
  }
  if (train_X.rows() < 2) throw std::invalid_argument("pca: need at least two rows");

  PcaModel model;
  model.mean = train_X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train_X.rowwise() - model.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(train_X.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca: eigen decomposition failed");

  // Eigen returns ascending eigenvalues.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double top = std::max(values[0], 0.0);
  model.rank = static_cast<std::size_t>((values.array() > 1e-10 * top).count());
  if (top == 0.0) model.rank = 0;
  if (model.rank < components) {
    throw NumericError("pca: training data has rank " + std::to_string(model.rank) + ", " +
                       std::to_string(components) + " components requested");
  }

  const auto c = static_cast<Eigen::Index>(components);
  model.axes = vectors.leftCols(c);
  model.variance = values.head(c);
  // Deterministic orientation: largest-magnitude loading positive.
  for (Eigen::Index j = 0; j < c; ++j) {
    Eigen::Index arg = 0;
    model.axes.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.axes(arg, j) < 0.0) model.axes.col(j) *= -1.0;
  }
  return model;
}

PcaPair pca_transform(const Eigen::MatrixXd& train_X, const Eigen::MatrixXd& other_X,
                      std::size_t components) {
  const PcaModel model = fit_pca(train_X, components);
  return {model.transform(train_X), model.transform(other_X)};
}

Eigen::VectorXd ridge_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double rho) {
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw std::invalid_argument("ridge: rho must be >= 0");
  if (y.size() != X.rows()) throw DimensionError("ridge: X and y row counts differ");
  const Eigen::Index k = X.rows();
  const Eigen::Index p = X.cols();

  Eigen::MatrixXd A(k + p, p);
  A.topRows(k) = X;
  A.bottomRows(p) = std::sqrt(rho) * Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k + p);
  b.head(k) = y;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < p) {
    throw NumericError("ridge: singular system (rank " + std::to_string(qr.rank()) + " < " +
                       std::to_string(p) + ")");
  }
  return qr.solve(b);
}

double rmse(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  if (X.cols() != w.size() || X.rows() != y.size()) throw DimensionError("rmse: shape mismatch");
  return std::sqrt((X * w - y).squaredNorm() / static_cast<double>(y.size()));
}

HoldoutResult repeated_holdout_select(const Dataset& data, const std::vector<double>& rho_grid,
                                      std::size_t repetitions, double split_fraction,
                                      std::uint64_t seed) {
  if (rho_grid.empty()) throw std::invalid_argument("holdout: empty rho grid");
  if (repetitions < 1) throw std::invalid_argument("holdout: repetitions must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::invalid_argument("holdout: split fraction must lie in (0, 1)");
  }

  HoldoutResult result;
  result.table.reserve(rho_grid.size());
  for (double rho : rho_grid) result.table.push_back({rho, 0.0});

  std::mt19937_64 rng(seed);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const Split split = train_test_split(data, split_fraction, rng());
    for (auto& row : result.table) {
      const Eigen::VectorXd w = ridge_fit(split.train.X, split.train.y, row.rho);
      row.mean_rmse += rmse(split.test.X, split.test.y, w) / static_cast<double>(repetitions);
    }
  }

  const HoldoutRow* best = &result.table.front();
  for (const auto& row : result.table) {
    if (row.mean_rmse < best->mean_rmse ||
        (row.mean_rmse == best->mean_rmse && row.rho > best->rho)) {
      best = &row;
    }
  }
  result.best_rho = best->rho;
  return result;
}

Eigen::MatrixXd attacker_closed_form(const Eigen::MatrixXd& X, const Eigen::VectorXd& w,
                                     double c_d, double z) {
  if (!(c_d >= 0.0)) throw std::invalid_argument("attacker: c_d must be >= 0");
  if (X.cols() != w.size()) throw DimensionError("attacker: weight dimension mismatch");
  const Eigen::VectorXd shift = c_d * (X * w).array() - c_d * z;
  return X - (shift / (1.0 + c_d * w.squaredNorm())) * w.transpose();
}

double evaluate_under_attack(const Eigen::VectorXd& w, const Dataset& test, double c_d) {
  if (static_cast<std::size_t>(w.size()) != test.cols()) {
    throw DimensionError("evaluate_under_attack: weights have " + std::to_string(w.size()) +
                         " entries, test data has " + std::to_string(test.cols()) + " features");
  }
  return rmse(attacker_closed_form(test.X, w, c_d), test.y, w);
}

NashResult nash_train(const Dataset& train, double c_d, const SolverConfig& config, double rho,
                      double c_l) {
  RegressionGameSpec spec;
  spec.X = train.X;
  spec.y = train.y;
  spec.c_d = c_d;
  spec.c_l = c_l;
  spec.rho = rho;
  const DifferentiableGame game = regression_game(spec);

  SolverConfig cfg = config;
  if (cfg.beta0.size() == 0) cfg.beta0 = flatten_rows(train.X);

  NashResult result;
  result.solution = solve_stackelberg(game, cfg);
  result.w = result.solution.final_alpha;
  return result;
}

SolverConfig regression_solver_defaults() {
  SolverConfig cfg;
  cfg.inner_steps = 100;
  cfg.inner_eta = 0.01;
  cfg.outer_steps = 350;
  cfg.outer_eta = 1e-6;
  cfg.method = HypergradientMethod::Backward;
  return cfg;
}

std::vector<double> default_rho_grid() { return {1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3}; }

std::vector<double> default_cd_grid() { return {0.0, 0.01, 0.05, 0.1, 0.5, 1.0}; }

PreparedData prepare_regression_data(const Dataset& data, const RegressionExperimentConfig& config,
                                     std::uint64_t seed) {
  data.validate();
  std::mt19937_64 rng(seed);
  const std::uint64_t split_seed = rng();
  const std::uint64_t holdout_seed = rng();

  Split split = standardize(train_test_split(data, config.train_fraction, split_seed));
  const std::size_t components =
      config.pca_components == 0 ? split.train.cols() : config.pca_components;
  const PcaModel pca = fit_pca(split.train.X, components);
  split.train.X = pca.transform(split.train.X);
  split.test.X = pca.transform(split.test.X);
  split.train.feature_names.clear();
  split.test.feature_names.clear();
  for (std::size_t j = 0; j < components; ++j) {
    split.train.feature_names.push_back("pc" + std::to_string(j + 1));
  }
  split.test.feature_names = split.train.feature_names;

  PreparedData out;
  out.rho = repeated_holdout_select(split.train, config.rho_grid, config.holdout_repetitions,
                                    config.holdout_fraction, holdout_seed)
                .best_rho;
  out.train = std::move(split.train);
  out.test = std::move(split.test);
  return out;
}

ExperimentResult run_regression_experiment(const PreparedData& prepared, double c_d,
                                           const RegressionExperimentConfig& config,
                                           std::uint64_t seed) {
  ExperimentResult r;
  r.c_d = c_d;
  r.seed = seed;
  r.rho = prepared.rho;
  r.train_rows = prepared.train.rows();
  r.test_rows = prepared.test.rows();
  r.features = prepared.train.cols();

  const Eigen::VectorXd w_raw = ridge_fit(prepared.train.X, prepared.train.y, prepared.rho);
  r.rmse_raw = evaluate_under_attack(w_raw, prepared.test, c_d);

  const NashResult nash = nash_train(prepared.train, c_d, config.solver, prepared.rho, config.c_l);
  r.error = nash.solution.error;
  r.rmse_nash = evaluate_under_attack(nash.w, prepared.test, c_d);
  const std::size_t epochs = std::max<std::size_t>(nash.solution.alpha_path.size(), 1);
  r.seconds_per_outer_epoch = nash.solution.total_wall_time / static_cast<double>(epochs);
  return r;
}

}  // namespace sg
