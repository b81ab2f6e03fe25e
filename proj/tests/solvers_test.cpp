#include "dataset.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "oracles.hpp"
#include "solvers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sg;

namespace {

Eigen::VectorXd constant(Eigen::Index n, double v) { return Eigen::VectorXd::Constant(n, v); }

SolverConfig config(std::size_t T, double eta, HypergradientMethod method = HypergradientMethod::Backward) {
  SolverConfig c;
  c.inner_steps = T;
  c.inner_eta = eta;
  c.method = method;
  return c;
}

DifferentiableGame small_regression_game(std::mt19937_64& rng, double c_d) {
  const Dataset d = synth_dataset(rng(), 20, 2, 0.1);
  RegressionGameSpec spec;
  spec.X = d.X;
  spec.y = d.y;
  spec.c_d = c_d;
  return regression_game(spec);
}

}  // namespace

TEST_CASE("inner ascent on the quadratic game") {
  const auto g = quadratic_game(1);
  const auto trace = inner_ascent(g, constant(1, 1.0), 40, 0.1, constant(1, 0.0));
  REQUIRE(trace.size() == 41);
  CHECK(trace[0][0] == 0.0);
  CHECK(trace[1][0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(trace[2][0] == doctest::Approx(0.84).epsilon(1e-15));
  for (std::size_t t = 0; t < trace.size(); ++t) {
    CHECK(trace[t][0] == doctest::Approx(1.0 - std::pow(0.4, static_cast<double>(t))).epsilon(1e-13));
  }

  SUBCASE("starting at the fixed point stays there") {
    const Eigen::VectorXd a(Eigen::Vector3d(0.5, -2.0, 7.0));
    for (const auto& b : inner_ascent(quadratic_game(3), a, 10, 0.1, a)) CHECK(b == a);
  }
  SUBCASE("eta = 1/6 converges in one step") {
    const auto t1 = inner_ascent(quadratic_game(2), constant(2, 2.0), 3, 1.0 / 6.0, constant(2, -1.0));
    CHECK((t1[1] - constant(2, 2.0)).norm() <= 1e-15);
  }
}

TEST_CASE("inner ascent contracts linearly at rate |1 - 6 eta|") {
  std::mt19937_64 rng(31);
  const auto g = quadratic_game(4);
  for (double eta : {0.02, 0.1, 0.25}) {
    const Eigen::VectorXd alpha = oracle::normal_vector(rng, 4);
    const Eigen::VectorXd beta0 = oracle::normal_vector(rng, 4);
    const auto trace = inner_ascent(g, alpha, 30, eta, beta0);
    const double d0 = (beta0 - alpha).norm();
    for (std::size_t t = 0; t < trace.size(); ++t) {
      const double expected = std::pow(std::abs(1.0 - 6.0 * eta), static_cast<double>(t)) * d0;
      CHECK(std::abs((trace[t] - alpha).norm() - expected) <= 1e-10);
    }
  }
}

TEST_CASE("inner divergence reports the iteration") {
  const auto g = quadratic_game(2);
  try {
    inner_ascent(g, constant(2, 1.0), 2000, 1.0, constant(2, 0.0));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    // |1 - 6| = 5 overflows after roughly 440 steps.
    CHECK(e.iteration() > 400);
    CHECK(e.iteration() < 500);
  }
  CHECK_THROWS_AS(inner_ascent(g, constant(2, 1.0), 5, 0.1, constant(3, 0.0)), DimensionError);
  CHECK_THROWS_AS(inner_ascent(g, constant(3, 1.0), 5, 0.1, constant(2, 0.0)), DimensionError);
}

TEST_CASE("hypergradients on the quadratic game match the unrolled closed form") {
  const auto g = quadratic_game(1);
  const Eigen::VectorXd alpha = constant(1, 1.0);
  const Eigen::VectorXd exact = oracle::quadratic::unrolled_gradient(alpha, constant(1, 0.0), 40, 0.1);
  CHECK(exact[0] == doctest::Approx(-9.0).epsilon(1e-12));

  const auto back = backward_hypergradient(g, alpha, config(40, 0.1));
  CHECK(std::abs(back.grad[0] - (-9.0)) <= 1e-6);
  CHECK(back.peak_trace_length == 41);

  const auto fwd = forward_hypergradient(g, alpha, config(40, 0.1, HypergradientMethod::Forward));
  CHECK(oracle::rel(fwd.grad, exact) <= 1e-14);
  CHECK(fwd.peak_trace_length <= 2);
  CHECK(fwd.beta_T.isApprox(oracle::quadratic::beta_T(alpha, constant(1, 0.0), 40, 0.1)));

  const auto fd = fd_hypergradient(g, alpha, config(40, 0.1), std::cbrt(std::numeric_limits<double>::epsilon()));
  CHECK(fd[0] == doctest::Approx(-9.0).epsilon(1e-8));
}

TEST_CASE("hypergradient vanishes at the equilibrium") {
  const auto g1 = quadratic_game(1);
  CHECK(std::abs(backward_hypergradient(g1, constant(1, -3.5), config(40, 0.1)).grad[0]) <= 1e-6);

  const auto g5 = quadratic_game(5);
  const auto fwd = forward_hypergradient(g5, constant(5, -3.5), config(40, 0.1, HypergradientMethod::Forward));
  CHECK(fwd.grad.norm() <= 1e-6);
}

TEST_CASE("short horizon with tiny step sees no coupling") {
  const auto g = quadratic_game(3);
  const Eigen::VectorXd alpha(Eigen::Vector3d(0.4, -1.0, 2.0));
  for (auto method : {HypergradientMethod::Backward, HypergradientMethod::Forward}) {
    const auto r = hypergradient(g, alpha, config(1, 1e-9, method));
    CHECK((r.grad - constant(3, -7.0)).norm() <= 1e-6);
  }
}

TEST_CASE("sensitivity of the quadratic follower is k I") {
  // Forward mode returns -7 - 2 S^T beta_T; with S = k I this is linear in beta_T.
  std::mt19937_64 rng(32);
  const auto g = quadratic_game(3);
  const double eta = 0.05;
  const std::size_t T = 25;
  const double k = 1.0 - std::pow(1.0 - 6.0 * eta, static_cast<double>(T));
  const Eigen::VectorXd alpha = oracle::normal_vector(rng, 3);
  const auto r = forward_hypergradient(g, alpha, config(T, eta, HypergradientMethod::Forward));
  CHECK(oracle::rel(r.grad, constant(3, -7.0) - 2.0 * k * r.beta_T) <= 1e-14);
}

TEST_CASE("finite differences of a leader objective without dependence are zero") {
  const auto flat = game_objective(2, 2, [](ad::Tape&, const ad::BlockVars& v) {
    return 0.0 * ad::sum(v[0]) + 5.0;
  });
  const auto follower = quadratic_game(2).follower();
  const DifferentiableGame g(2, 2, flat, follower, Sense::Maximize);
  const Eigen::VectorXd fd = fd_hypergradient(g, constant(2, 0.3), config(10, 0.1), 1e-6);
  CHECK(fd.isZero());
  CHECK_THROWS_AS(fd_hypergradient(g, constant(2, 0.3), config(10, 0.1), 0.0), std::invalid_argument);
}

TEST_CASE("forward mode is exact for the unrolled objective") {
  std::mt19937_64 rng(33);
  const double h = std::cbrt(std::numeric_limits<double>::epsilon());
  SUBCASE("quadratic game") {
    for (std::size_t n : {1u, 3u, 5u}) {
      const auto g = quadratic_game(n);
      const Eigen::VectorXd alpha = oracle::normal_vector(rng, static_cast<Eigen::Index>(n));
      const auto cfg = config(40, 0.1, HypergradientMethod::Forward);
      const Eigen::VectorXd fwd = forward_hypergradient(g, alpha, cfg).grad;
      CHECK(oracle::rel(fwd, fd_hypergradient(g, alpha, cfg, h)) <= 1e-6);
      // Independent oracle: differences of the closed-form unrolled objective.
      const auto closed = [&](const Eigen::VectorXd& a) {
        const Eigen::VectorXd b = oracle::quadratic::beta_T(a, Eigen::VectorXd::Zero(a.size()), 40, 0.1);
        return -(7.0 * a.sum() + b.squaredNorm());
      };
      CHECK(oracle::rel(fwd, oracle::central_gradient(closed, alpha)) <= 1e-5);
    }
  }
  SUBCASE("regression game") {
    for (int draw = 0; draw < 3; ++draw) {
      const auto g = small_regression_game(rng, 1.0);
      const Eigen::VectorXd alpha = 0.5 * oracle::normal_vector(rng, 2);
      const auto cfg = config(40, 0.1, HypergradientMethod::Forward);
      const Eigen::VectorXd fwd = forward_hypergradient(g, alpha, cfg).grad;
      const auto unrolled = [&](const Eigen::VectorXd& a) { return unrolled_leader_objective(g, a, cfg); };
      CHECK(oracle::rel(fwd, oracle::central_gradient(unrolled, alpha)) <= 1e-5);
    }
  }
}

TEST_CASE("backward with current-iterate Hessians is exact reverse mode") {
  std::mt19937_64 rng(34);
  auto check_game = [&](const DifferentiableGame& g, const Eigen::VectorXd& alpha) {
    auto cfg = config(30, 0.05, HypergradientMethod::Forward);
    const Eigen::VectorXd fwd = forward_hypergradient(g, alpha, cfg).grad;
    cfg.hessian_point = HessianPoint::CurrentIterate;
    const auto back = backward_hypergradient(g, alpha, cfg);
    CHECK(oracle::rel(back.grad, fwd) <= 1e-9);
    CHECK(back.peak_trace_length == 31);
  };
  check_game(quadratic_game(4), oracle::normal_vector(rng, 4));
  for (int draw = 0; draw < 3; ++draw) {
    check_game(small_regression_game(rng, 0.5), 0.5 * oracle::normal_vector(rng, 2));
  }
}

TEST_CASE("adjoint discretization gap shrinks with the step size") {
  // T * eta is held at 1 so every run integrates the same follower flow.
  const double etas[] = {0.1, 0.05, 0.025};
  auto gaps = [&](const DifferentiableGame& g, const Eigen::VectorXd& alpha) {
    std::array<double, 3> out{};
    for (int i = 0; i < 3; ++i) {
      auto cfg = config(static_cast<std::size_t>(std::lround(1.0 / etas[i])), etas[i]);
      const Eigen::VectorXd back = backward_hypergradient(g, alpha, cfg).grad;
      cfg.method = HypergradientMethod::Forward;
      out[i] = oracle::rel(back, forward_hypergradient(g, alpha, cfg).grad);
    }
    return out;
  };

  SUBCASE("quadratic game has constant curvature, so the gap is rounding only") {
    std::mt19937_64 rng(35);
    const auto g = quadratic_game(3);
    for (double gap : gaps(g, oracle::normal_vector(rng, 3))) CHECK(gap <= 1e-12);
  }
  SUBCASE("regression game") {
    std::mt19937_64 rng(36);
    for (int draw = 0; draw < 10; ++draw) {
      const auto g = small_regression_game(rng, 1.0);
      const auto gap = gaps(g, 0.5 / std::sqrt(2.0) * oracle::normal_vector(rng, 2));
      CAPTURE(gap[0]);
      CAPTURE(gap[1]);
      CAPTURE(gap[2]);
      CHECK(gap[0] > gap[1]);
      CHECK(gap[1] > gap[2]);
      CHECK(gap[2] > 0.0);
    }
  }
}

TEST_CASE("outer loop reaches the quadratic equilibrium") {
  for (auto method : {HypergradientMethod::Backward, HypergradientMethod::Forward}) {
    SolverConfig cfg = config(40, 0.1, method);
    const auto g = quadratic_game(5);
    const auto r = solve_stackelberg(g, cfg);
    CHECK_FALSE(r.error);
    CHECK(r.alpha_path.size() == 41);
    CHECK(r.leader_objective_path.size() == 41);
    CHECK(r.gradient_norm_path.size() == 41);
    CHECK((r.final_alpha.array() + 3.5).abs().maxCoeff() <= 1e-2);
    CHECK((r.final_beta.array() + 3.5).abs().maxCoeff() <= 1e-2);
    CHECK(r.peak_trace_length == (method == HypergradientMethod::Backward ? 41u : 2u));
  }
}

TEST_CASE("outer loop started at the equilibrium stays there") {
  SolverConfig cfg = config(40, 0.1);
  cfg.alpha0 = constant(3, -3.5);
  cfg.beta0 = constant(3, -3.5);
  const auto r = solve_stackelberg(quadratic_game(3), cfg);
  CHECK((r.final_alpha - cfg.alpha0).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("both estimators reach the same leader decision") {
  const auto g = quadratic_game(4);
  const auto back = solve_stackelberg(g, config(40, 0.1, HypergradientMethod::Backward));
  const auto fwd = solve_stackelberg(g, config(40, 0.1, HypergradientMethod::Forward));
  CHECK((back.final_alpha - fwd.final_alpha).cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("minimize games descend the leader cost") {
  std::mt19937_64 rng(37);
  const auto g = small_regression_game(rng, 0.5);
  SolverConfig cfg = config(40, 0.1);
  cfg.outer_steps = 60;
  cfg.outer_eta = 0.005;
  const auto r = solve_stackelberg(g, cfg);
  REQUIRE_FALSE(r.error);
  CHECK(r.leader_objective_path.back() < r.leader_objective_path.front());
}

TEST_CASE("outer divergence yields a partial report") {
  SolverConfig cfg = config(40, 0.1);
  cfg.outer_steps = 5000;
  cfg.outer_eta = 50.0;
  const auto r = solve_stackelberg(quadratic_game(2), cfg);
  REQUIRE(r.error);
  CHECK(r.alpha_path.size() < 5001);
  CHECK(r.alpha_path.size() == r.leader_objective_path.size());
}

TEST_CASE("unconverged follower attaches a warning") {
  const auto g = quadratic_game(2);
  auto cfg = config(2, 0.01);
  CHECK(backward_hypergradient(g, constant(2, 3.0), cfg).warning);
  CHECK_FALSE(backward_hypergradient(g, constant(2, 3.0), config(40, 0.1)).warning);
  cfg.method = HypergradientMethod::Forward;
  const auto r = forward_hypergradient(g, constant(2, 3.0), cfg);
  CHECK(r.warning);
  CHECK(r.inner_residual > 1.0);
}

TEST_CASE("solver configuration validation") {
  const auto g = quadratic_game(2);
  auto bad = [&](auto mutate) {
    SolverConfig c;
    mutate(c);
    return c;
  };
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.inner_steps = 0; })), std::invalid_argument);
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.inner_eta = 0.0; })), std::invalid_argument);
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.outer_eta = -1.0; })), std::invalid_argument);
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.outer_steps = 0; })), std::invalid_argument);
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.beta0 = constant(3, 0.0); })), DimensionError);
  CHECK_THROWS_AS(solve_stackelberg(g, bad([](SolverConfig& c) { c.alpha0 = constant(1, 0.0); })), DimensionError);
  CHECK_THROWS_AS(hypergradient(g, constant(3, 0.0), SolverConfig{}), DimensionError);
}
