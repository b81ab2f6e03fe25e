#include "solvers.hpp"

#include "errors.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sg {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::span<const double> view(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

Eigen::VectorXd to_vector(std::span<const double> s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

// A game objective re-recorded at successive (alpha, beta) points.
class Probe {
 public:
  explicit Probe(const ad::ScalarFunction& f) : rec_(f), seed_(f.total_dim(), 0.0) {}

  void at(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
    const std::span<const double> in[2] = {view(alpha), view(beta)};
    rec_.record(in);
  }

  double value() const { return rec_.value(); }
  std::span<const double> gradient() { return rec_.gradient(); }

  // Hessian of the objective applied to (0, v_beta).
  std::span<const double> hessian_times_beta(const Eigen::VectorXd& v) {
    const std::size_t off = rec_.function().offset(DifferentiableGame::kBeta);
    std::fill(seed_.begin(), seed_.end(), 0.0);
    std::copy(v.begin(), v.end(), seed_.begin() + static_cast<std::ptrdiff_t>(off));
    return rec_.hessian_vector(seed_);
  }

  std::span<const double> alpha_part(std::span<const double> full) const {
    return rec_.slice(full, DifferentiableGame::kAlpha);
  }
  std::span<const double> beta_part(std::span<const double> full) const {
    return rec_.slice(full, DifferentiableGame::kBeta);
  }

  ad::Recording& recording() { return rec_; }

 private:
  ad::Recording rec_;
  std::vector<double> seed_;
};

Eigen::VectorXd initial_beta(const DifferentiableGame& game, const Eigen::VectorXd& beta0) {
  if (beta0.size() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(game.m()));
  return beta0;
}

void check_finite(const Eigen::VectorXd& beta, std::size_t t) {
  if (!beta.allFinite()) {
    throw DivergenceError("inner dynamics diverged at iteration " + std::to_string(t), t);
  }
}

void check_alpha(const DifferentiableGame& game, const Eigen::VectorXd& alpha) {
  if (static_cast<std::size_t>(alpha.size()) != game.n()) {
    throw DimensionError("alpha has " + std::to_string(alpha.size()) + " entries, game expects " +
                         std::to_string(game.n()));
  }
}

void attach_convergence_warning(HypergradientReport& report, double tol) {
  const double bound = tol * (1.0 + report.beta_T.norm());
  if (report.inner_residual > bound) {
    report.warning = "inner dynamics not converged: |d_beta u_A| = " +
                     std::to_string(report.inner_residual) + " > " + std::to_string(bound);
  }
}

double inner_residual(Probe& follower, const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  follower.at(alpha, beta);
  return to_vector(follower.beta_part(follower.gradient())).norm();
}

}  // namespace

void SolverConfig::validate(std::size_t n, std::size_t m) const {
  if (inner_steps < 1) throw std::invalid_argument("solver: inner_steps must be >= 1");
  if (!(inner_eta > 0.0) || !std::isfinite(inner_eta)) {
    throw std::invalid_argument("solver: inner_eta must be positive");
  }
  if (outer_steps < 1) throw std::invalid_argument("solver: outer_steps must be >= 1");
  if (!(outer_eta > 0.0) || !std::isfinite(outer_eta)) {
    throw std::invalid_argument("solver: outer_eta must be positive");
  }
  if (!(convergence_warn_tol >= 0.0)) {
    throw std::invalid_argument("solver: convergence_warn_tol must be >= 0");
  }
  if (beta0.size() != 0 && static_cast<std::size_t>(beta0.size()) != m) {
    throw DimensionError("solver: beta0 has " + std::to_string(beta0.size()) +
                         " entries, expected " + std::to_string(m));
  }
  if (alpha0.size() != 0 && static_cast<std::size_t>(alpha0.size()) != n) {
    throw DimensionError("solver: alpha0 has " + std::to_string(alpha0.size()) +
                         " entries, expected " + std::to_string(n));
  }
}

std::vector<Eigen::VectorXd> inner_ascent(const DifferentiableGame& game,
                                          const Eigen::VectorXd& alpha, std::size_t T,
                                          double eta, const Eigen::VectorXd& beta0) {
  check_alpha(game, alpha);
  if (beta0.size() != 0 && static_cast<std::size_t>(beta0.size()) != game.m()) {
    throw DimensionError("inner_ascent: beta0 has wrong dimension");
  }
  const double step = game.ascent_sign() * eta;
  Probe follower(game.follower());
  std::vector<Eigen::VectorXd> trace;
  trace.reserve(T + 1);
  trace.push_back(initial_beta(game, beta0));
  for (std::size_t t = 1; t <= T; ++t) {
    follower.at(alpha, trace.back());
    Eigen::VectorXd next = trace.back() + step * to_vector(follower.beta_part(follower.gradient()));
    check_finite(next, t);
    trace.push_back(std::move(next));
  }
  return trace;
}

HypergradientReport backward_hypergradient(const DifferentiableGame& game,
                                           const Eigen::VectorXd& alpha,
                                           const SolverConfig& config) {
  config.validate(game.n(), game.m());
  check_alpha(game, alpha);
  const auto start = Clock::now();
  const double sign = game.ascent_sign();
  const double eta = config.inner_eta;
  const std::size_t T = config.inner_steps;

  const std::vector<Eigen::VectorXd> trace =
      inner_ascent(game, alpha, T, eta, config.beta0);

  HypergradientReport report;
  report.beta_T = trace.back();
  report.peak_trace_length = trace.size();

  Probe leader(game.leader());
  leader.at(alpha, report.beta_T);
  report.leader_value = leader.value();
  auto g = leader.gradient();
  Eigen::VectorXd d_alpha = to_vector(leader.alpha_part(g));
  Eigen::VectorXd lambda = -to_vector(leader.beta_part(g));

  Probe follower(game.follower());
  report.inner_residual = inner_residual(follower, alpha, report.beta_T);

  // The inner update is beta + eta * sign * d_beta u_A, so every second
  // derivative of u_A enters scaled by sign.
  const double scale = eta * sign;
  const bool next = config.hessian_point == HessianPoint::NextIterate;
  for (std::size_t t = T; t-- > 0;) {
    follower.at(alpha, trace[next ? t + 1 : t]);
    auto hv = follower.hessian_times_beta(lambda);
    d_alpha -= scale * to_vector(follower.alpha_part(hv));
    lambda += scale * to_vector(follower.beta_part(hv));
  }
  if (!d_alpha.allFinite()) throw DivergenceError("adjoint sweep produced non-finite values", 0);

  report.grad = std::move(d_alpha);
  report.wall_time = seconds_since(start);
  attach_convergence_warning(report, config.convergence_warn_tol);
  return report;
}

HypergradientReport forward_hypergradient(const DifferentiableGame& game,
                                          const Eigen::VectorXd& alpha,
                                          const SolverConfig& config) {
  config.validate(game.n(), game.m());
  check_alpha(game, alpha);
  const auto start = Clock::now();
  const double scale = config.inner_eta * game.ascent_sign();
  const auto m = static_cast<Eigen::Index>(game.m());
  const auto n = static_cast<Eigen::Index>(game.n());

  Probe follower(game.follower());
  Eigen::VectorXd beta = initial_beta(game, config.beta0);
  Eigen::MatrixXd sensitivity = Eigen::MatrixXd::Zero(m, n);  // d_alpha beta_t

  for (std::size_t t = 1; t <= config.inner_steps; ++t) {
    follower.at(alpha, beta);
    const Eigen::VectorXd g = to_vector(follower.beta_part(follower.gradient()));
    const Eigen::MatrixXd h_bb = ad::hessian_block(follower.recording(), DifferentiableGame::kBeta,
                                                   DifferentiableGame::kBeta);
    const Eigen::MatrixXd h_ba = ad::hessian_block(follower.recording(), DifferentiableGame::kBeta,
                                                   DifferentiableGame::kAlpha);
    sensitivity += scale * (h_ba + h_bb * sensitivity);
    beta += scale * g;
    check_finite(beta, t);
  }

  HypergradientReport report;
  report.beta_T = beta;
  report.peak_trace_length = 2;

  Probe leader(game.leader());
  leader.at(alpha, beta);
  report.leader_value = leader.value();
  auto lg = leader.gradient();
  report.grad = to_vector(leader.alpha_part(lg)) +
                sensitivity.transpose() * to_vector(leader.beta_part(lg));
  if (!report.grad.allFinite()) {
    throw DivergenceError("sensitivity propagation produced non-finite values",
                          config.inner_steps);
  }
  report.inner_residual = inner_residual(follower, alpha, beta);
  report.wall_time = seconds_since(start);
  attach_convergence_warning(report, config.convergence_warn_tol);
  return report;
}

HypergradientReport hypergradient(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                  const SolverConfig& config) {
  HypergradientReport report = config.method == HypergradientMethod::Backward
                                   ? backward_hypergradient(game, alpha, config)
                                   : forward_hypergradient(game, alpha, config);
  if (!std::isfinite(report.leader_value)) {
    throw DivergenceError("leader objective is not finite", config.inner_steps);
  }
  return report;
}

double unrolled_leader_objective(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                 const SolverConfig& config) {
  const auto trace = inner_ascent(game, alpha, config.inner_steps, config.inner_eta, config.beta0);
  Probe leader(game.leader());
  leader.at(alpha, trace.back());
  return leader.value();
}

Eigen::VectorXd fd_hypergradient(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                                 const SolverConfig& config, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("fd_hypergradient: h must be positive");
  config.validate(game.n(), game.m());
  check_alpha(game, alpha);
  Eigen::VectorXd grad(alpha.size());
  Eigen::VectorXd probe = alpha;
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    const double step = h * (1.0 + std::abs(alpha[i]));
    probe[i] = alpha[i] + step;
    const double up_x = probe[i];
    const double up = unrolled_leader_objective(game, probe, config);
    probe[i] = alpha[i] - step;
    const double down_x = probe[i];
    const double down = unrolled_leader_objective(game, probe, config);
    probe[i] = alpha[i];
    grad[i] = (up - down) / (up_x - down_x);
  }
  return grad;
}

SolutionReport solve_stackelberg(const DifferentiableGame& game, const SolverConfig& config) {
  config.validate(game.n(), game.m());
  const auto start = Clock::now();
  const double sign = game.ascent_sign();

  SolutionReport report;
  Eigen::VectorXd alpha = config.alpha0.size() == 0
                              ? Eigen::VectorXd::Zero(static_cast<Eigen::Index>(game.n()))
                              : config.alpha0;
  report.alpha_path.reserve(config.outer_steps + 1);

  for (std::size_t s = 0; s <= config.outer_steps; ++s) {
    HypergradientReport hg;
    try {
      hg = hypergradient(game, alpha, config);
    } catch (const DivergenceError& e) {
      report.error = "outer step " + std::to_string(s) + ": " + e.what();
      break;
    }
    report.alpha_path.push_back(alpha);
    report.leader_objective_path.push_back(hg.leader_value);
    report.gradient_norm_path.push_back(hg.grad.norm());
    report.final_alpha = alpha;
    report.final_beta = hg.beta_T;
    report.peak_trace_length = std::max(report.peak_trace_length, hg.peak_trace_length);
    if (s == config.outer_steps) break;

    alpha += sign * config.outer_eta * hg.grad;
    if (!alpha.allFinite()) {
      report.error = "outer step " + std::to_string(s + 1) + ": leader iterate is not finite";
      break;
    }
  }
  report.total_wall_time = seconds_since(start);
  return report;
}

}  // namespace sg
