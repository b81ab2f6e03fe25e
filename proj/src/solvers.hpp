#pragma once

#include "game.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace sg {

enum class HypergradientMethod { Backward, Forward };

/// Where the reverse loop of the backward method evaluates second
/// derivatives. NextIterate follows the adjoint discretization (beta_{t+1});
/// CurrentIterate is exact reverse-mode differentiation of the unrolled
/// update and agrees with the forward method to rounding.
enum class HessianPoint { NextIterate, CurrentIterate };

struct SolverConfig {
  std::size_t inner_steps = 40;
  double inner_eta = 0.1;
  std::size_t outer_steps = 40;
  double outer_eta = 0.1;
  HypergradientMethod method = HypergradientMethod::Backward;
  Eigen::VectorXd beta0;   // empty: zero vector
  Eigen::VectorXd alpha0;  // empty: zero vector
  HessianPoint hessian_point = HessianPoint::NextIterate;
  double convergence_warn_tol = 1e-3;

  /// Throws std::invalid_argument / DimensionError when unusable for a game
  /// with the given dimensions.
  void validate(std::size_t n, std::size_t m) const;
};

struct HypergradientReport {
  Eigen::VectorXd grad;      // total derivative of the leader objective
  Eigen::VectorXd beta_T;
  double leader_value = 0.0;  // leader objective at (alpha, beta_T)
  double inner_residual = 0.0;
  double wall_time = 0.0;
  std::size_t peak_trace_length = 0;
  std::optional<std::string> warning;
};

struct SolutionReport {
  std::vector<Eigen::VectorXd> alpha_path;
  Eigen::VectorXd final_alpha;
  Eigen::VectorXd final_beta;
  std::vector<double> leader_objective_path;
  std::vector<double> gradient_norm_path;
  double total_wall_time = 0.0;
  std::size_t peak_trace_length = 0;
  std::optional<std::string> error;  // set when an outer step diverged
};

/// Follower dynamics beta_t = beta_{t-1} +/- eta d_beta u_A; returns all
/// T+1 iterates. Throws DivergenceError on a non-finite iterate.
std::vector<Eigen::VectorXd> inner_ascent(const DifferentiableGame& game,
                                          const Eigen::VectorXd& alpha, std::size_t T,
                                          double eta, const Eigen::VectorXd& beta0);

/// Adjoint (reverse) hypergradient. Stores the whole follower trace.
HypergradientReport backward_hypergradient(const DifferentiableGame& game,
                                           const Eigen::VectorXd& alpha,
                                           const SolverConfig& config);

/// Sensitivity-propagation (forward) hypergradient. Keeps only the current
/// iterate and the m x n sensitivity d_alpha beta_t.
HypergradientReport forward_hypergradient(const DifferentiableGame& game,
                                          const Eigen::VectorXd& alpha,
                                          const SolverConfig& config);

HypergradientReport hypergradient(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                  const SolverConfig& config);

/// Central differences of alpha -> leader(alpha, beta_T(alpha)) with step
/// h * (1 + |alpha_i|) per coordinate.
Eigen::VectorXd fd_hypergradient(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                 const SolverConfig& config, double h);

/// Unrolled leader objective alpha -> leader(alpha, beta_T(alpha)).
double unrolled_leader_objective(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                 const SolverConfig& config);

/// Fixed-step gradient ascent (descent for minimize games) on the leader
/// objective. Divergence yields a partial report with `error` set.
SolutionReport solve_stackelberg(const DifferentiableGame& game, const SolverConfig& config);

}  // namespace sg
