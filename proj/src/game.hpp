#pragma once

#include "autodiff.hpp"

#include <Eigen/Dense>

#include <cstddef>

namespace sg {

enum class Sense { Maximize, Minimize };

/// Two-player leader/follower game. Both objectives take the blocks
/// "alpha" (leader, dim n) and "beta" (follower, dim m). With
/// Sense::Minimize the objectives are costs rather than utilities.
class DifferentiableGame {
 public:
  static constexpr std::size_t kAlpha = 0;
  static constexpr std::size_t kBeta = 1;

  DifferentiableGame(std::size_t n, std::size_t m, ad::ScalarFunction leader,
                     ad::ScalarFunction follower, Sense sense);

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  Sense sense() const noexcept { return sense_; }
  const ad::ScalarFunction& leader() const noexcept { return leader_; }
  const ad::ScalarFunction& follower() const noexcept { return follower_; }

  /// +1 for maximize games, -1 for minimize games.
  double ascent_sign() const noexcept { return sense_ == Sense::Maximize ? 1.0 : -1.0; }

 private:
  std::size_t n_;
  std::size_t m_;
  ad::ScalarFunction leader_;
  ad::ScalarFunction follower_;
  Sense sense_;
};

/// Builds a ScalarFunction over the standard (alpha:n, beta:m) blocks.
ad::ScalarFunction game_objective(std::size_t n, std::size_t m, ad::Evaluator evaluator);

/// u_A = -sum_i 3 (beta_i - alpha_i)^2, u_D = -sum_i (7 alpha_i + beta_i^2).
/// Equilibrium alpha* = beta* = -3.5 in every coordinate.
DifferentiableGame quadratic_game(std::size_t n);

/// Adversarial ridge regression. The leader picks weights w (dim p); the
/// follower picks the transformed design matrix Xbar, flattened row-major
/// (dim k*p).
struct RegressionGameSpec {
  Eigen::MatrixXd X;  // k x p
  Eigen::VectorXd y;  // k
  double c_d = 1.0;
  double c_l = 1.0;
  double rho = 0.0;
  double z = 0.0;

  void validate() const;
};

/// Leader cost   sum_i c_l (xbar_i.w - y_i)^2 + rho |w|^2
/// Follower cost sum_i c_d (xbar_i.w - z)^2 + |X - Xbar|_F^2
DifferentiableGame regression_game(const RegressionGameSpec& spec);

/// Row-major flattening used for the follower block of regression_game.
Eigen::VectorXd flatten_rows(const Eigen::MatrixXd& X);
Eigen::MatrixXd unflatten_rows(const Eigen::VectorXd& v, std::size_t rows,
                               std::size_t cols);

struct ObjectivePair {
  double leader = 0.0;
  double follower = 0.0;
};

ObjectivePair evaluate_pair(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                            const Eigen::VectorXd& beta);

}  // namespace sg
