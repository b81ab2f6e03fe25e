#include "adversarial_regression.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace sg;

namespace {

ad::NamedInputs ab(const Eigen::VectorXd& alpha, const Eigen::VectorXd& beta) {
  return {{"alpha", {alpha.begin(), alpha.end()}}, {"beta", {beta.begin(), beta.end()}}};
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("quadratic game values") {
  const auto g1 = quadratic_game(1);
  CHECK(g1.sense() == Sense::Maximize);
  CHECK(ad::evaluate(g1.follower(), ab(vec({0.0}), vec({1.0}))) == -3.0);
  CHECK(ad::evaluate(g1.leader(), ab(vec({0.0}), vec({0.0}))) == 0.0);

  const auto g2 = quadratic_game(2);
  CHECK(ad::evaluate(g2.leader(), ab(vec({1.0, 1.0}), vec({2.0, 2.0}))) == -22.0);
  const auto pair = evaluate_pair(g2, vec({0.0, 0.0}), vec({1.0, -1.0}));
  CHECK(pair.follower == -6.0);
  CHECK(pair.leader == -2.0);

  const auto eq = evaluate_pair(g1, vec({-3.5}), vec({-3.5}));
  CHECK(eq.leader == doctest::Approx(12.25));
  CHECK(eq.follower == 0.0);
  const auto zero = evaluate_pair(g1, vec({0.0}), vec({0.0}));
  CHECK(zero.leader == 0.0);
  CHECK(zero.follower == 0.0);

  CHECK_THROWS_AS(quadratic_game(0), std::invalid_argument);
  CHECK_THROWS_AS(evaluate_pair(g2, vec({0.0}), vec({0.0, 0.0})), DimensionError);
}

TEST_CASE("quadratic game derivatives") {
  const auto g = quadratic_game(3);
  const Eigen::VectorXd b = vec({0.5, -2.0, 1.0});
  const auto in = ab(Eigen::VectorXd::Zero(3), b);
  CHECK(ad::gradient(g.follower(), in, "beta").isApprox(-6.0 * b));
  CHECK(ad::gradient(g.leader(), ab(vec({4.0, -1.0, 0.0}), b), "alpha").isApprox(Eigen::VectorXd::Constant(3, -7.0)));
  CHECK(ad::hvp(g.follower(), in, "beta", vec({1.0, 0.0, 0.0})).isApprox(vec({-6.0, 0.0, 0.0})));
  CHECK(ad::mixed_hvp(g.follower(), in, "beta", "alpha", vec({1.0, 0.0, 0.0})).isApprox(vec({6.0, 0.0, 0.0})));
  CHECK(ad::hessian_block(g.follower(), in, "beta", "beta").isApprox(-6.0 * Eigen::MatrixXd::Identity(3, 3)));

  const auto g2 = quadratic_game(2);
  const auto in2 = ab(vec({0.3, 0.1}), vec({-1.0, 2.0}));
  CHECK(ad::hessian_block(g2.follower(), in2, "alpha", "beta").isApprox(6.0 * Eigen::MatrixXd::Identity(2, 2)));
}

TEST_CASE("quadratic equilibrium is stationary") {
  const auto g = quadratic_game(1);
  const auto in = ab(vec({-3.5}), vec({-3.5}));
  CHECK(ad::gradient(g.follower(), in, "beta")[0] == 0.0);
  // Total derivative along the best response beta*(alpha) = alpha.
  const double total = ad::gradient(g.leader(), in, "alpha")[0] + ad::gradient(g.leader(), in, "beta")[0];
  CHECK(total == doctest::Approx(0.0));
}

TEST_CASE("quadratic game properties on sampled points") {
  std::mt19937_64 rng(21);
  const auto g = quadratic_game(4);
  for (int draw = 0; draw < 50; ++draw) {
    const Eigen::VectorXd alpha = oracle::normal_vector(rng, 4, 3.0);
    const Eigen::VectorXd beta = oracle::normal_vector(rng, 4, 3.0);
    const Eigen::VectorXd grad = ad::gradient(g.follower(), ab(alpha, beta), "beta");
    // Stationary only at beta = alpha.
    CHECK(ad::gradient(g.follower(), ab(alpha, alpha), "beta").norm() == 0.0);
    CHECK(grad.norm() > 0.0);
    // Monotone toward the fixed point, with Hessian -6 I.
    const double pairing = (beta - alpha).dot(-grad);
    CHECK(pairing == doctest::Approx(6.0 * (beta - alpha).squaredNorm()));
    CHECK(pairing > 0.0);
    const Eigen::MatrixXd H = ad::hessian_block(g.follower(), ab(alpha, beta), "beta", "beta");
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff() < 0.0);
  }
}

TEST_CASE("regression game objectives match direct formulas") {
  std::mt19937_64 rng(22);
  RegressionGameSpec spec;
  spec.X = oracle::normal_matrix(rng, 5, 3);
  spec.y = oracle::normal_vector(rng, 5);
  spec.c_d = 0.7;
  spec.c_l = 1.3;
  spec.rho = 0.2;
  spec.z = 0.4;
  const auto g = regression_game(spec);
  CHECK(g.sense() == Sense::Minimize);
  CHECK(g.n() == 3);
  CHECK(g.m() == 15);

  const Eigen::VectorXd w = oracle::normal_vector(rng, 3);
  const Eigen::MatrixXd Xbar = spec.X + 0.1 * oracle::normal_matrix(rng, 5, 3);
  const auto v = evaluate_pair(g, w, flatten_rows(Xbar));
  const Eigen::VectorXd pred = Xbar * w;
  const double leader = spec.c_l * (pred - spec.y).squaredNorm() + spec.rho * w.squaredNorm();
  const double follower = spec.c_d * (pred.array() - spec.z).matrix().squaredNorm() +
                          (spec.X - Xbar).squaredNorm();
  CHECK(v.leader == doctest::Approx(leader).epsilon(1e-12));
  CHECK(v.follower == doctest::Approx(follower).epsilon(1e-12));
}

TEST_CASE("regression game with clean data and ridge weights gives the ridge loss") {
  std::mt19937_64 rng(23);
  RegressionGameSpec spec;
  spec.X = oracle::normal_matrix(rng, 12, 3);
  spec.y = oracle::normal_vector(rng, 12);
  spec.rho = 0.5;
  const auto g = regression_game(spec);
  // Normal equations solved independently of ridge_fit.
  const Eigen::MatrixXd A = spec.X.transpose() * spec.X + spec.rho * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd w = A.llt().solve(spec.X.transpose() * spec.y);
  const double loss = (spec.X * w - spec.y).squaredNorm() + spec.rho * w.squaredNorm();
  CHECK(evaluate_pair(g, w, flatten_rows(spec.X)).leader == doctest::Approx(loss).epsilon(1e-12));
}

TEST_CASE("single instance best response") {
  RegressionGameSpec spec;
  spec.X = Eigen::MatrixXd{{1.0, 1.0}};
  spec.y = vec({0.0});
  spec.c_d = 1.0;
  const auto g = regression_game(spec);
  const Eigen::VectorXd w = vec({1.0, 0.0});
  const Eigen::VectorXd best = vec({0.5, 1.0});
  CHECK(ad::gradient(g.follower(), ab(w, best), "beta").norm() <= 1e-14);
  CHECK(oracle::attacker_by_normal_equations(spec.X, w, 1.0).row(0).transpose().isApprox(best));
}

TEST_CASE("regression follower without incentive leaves the data alone") {
  std::mt19937_64 rng(24);
  RegressionGameSpec spec;
  spec.X = oracle::normal_matrix(rng, 6, 2);
  spec.y = oracle::normal_vector(rng, 6);
  const Eigen::VectorXd clean = flatten_rows(spec.X);

  SUBCASE("c_d = 0") {
    spec.c_d = 0.0;
    const auto g = regression_game(spec);
    CHECK(ad::gradient(g.follower(), ab(oracle::normal_vector(rng, 2), clean), "beta").norm() == 0.0);
  }
  SUBCASE("w = 0") {
    spec.c_d = 5.0;
    const auto g = regression_game(spec);
    CHECK(ad::gradient(g.follower(), ab(Eigen::VectorXd::Zero(2), clean), "beta").norm() == 0.0);
  }
}

TEST_CASE("regression follower is strictly convex") {
  std::mt19937_64 rng(25);
  for (double c_d : {0.0, 0.1, 1.0, 10.0}) {
    RegressionGameSpec spec;
    spec.X = oracle::normal_matrix(rng, 4, 3);
    spec.y = oracle::normal_vector(rng, 4);
    spec.c_d = c_d;
    const auto g = regression_game(spec);
    const Eigen::VectorXd w = oracle::normal_vector(rng, 3);
    const auto in = ab(w, flatten_rows(spec.X));
    double smallest = 1e300;
    for (int draw = 0; draw < 30; ++draw) {
      const Eigen::VectorXd v = oracle::normal_vector(rng, 12);
      smallest = std::min(smallest, v.dot(ad::hvp(g.follower(), in, "beta", v)) / v.squaredNorm());
    }
    CAPTURE(c_d);
    CHECK(smallest >= 2.0 - 1e-9);
  }
}

TEST_CASE("closed-form attacker zeroes the follower gradient") {
  std::mt19937_64 rng(26);
  std::uniform_real_distribution<double> U(0.0, 3.0);
  for (int draw = 0; draw < 20; ++draw) {
    RegressionGameSpec spec;
    spec.X = oracle::normal_matrix(rng, 7, 3);
    spec.y = oracle::normal_vector(rng, 7);
    spec.c_d = U(rng);
    const auto g = regression_game(spec);
    const Eigen::VectorXd w = oracle::normal_vector(rng, 3);
    const Eigen::MatrixXd best = attacker_closed_form(spec.X, w, spec.c_d);
    const double grad = ad::gradient(g.follower(), ab(w, flatten_rows(best)), "beta").norm();
    CHECK(grad <= 1e-8 * (1.0 + spec.X.norm()));
  }
}

TEST_CASE("regression mixed second derivative matches differenced follower gradients") {
  std::mt19937_64 rng(27);
  RegressionGameSpec spec;
  spec.X = oracle::normal_matrix(rng, 4, 2);
  spec.y = oracle::normal_vector(rng, 4);
  spec.c_d = 0.8;
  const auto g = regression_game(spec);
  const Eigen::VectorXd w = oracle::normal_vector(rng, 2);
  const Eigen::VectorXd beta = flatten_rows(spec.X) + 0.2 * oracle::normal_vector(rng, 8);
  const Eigen::VectorXd v = oracle::normal_vector(rng, 8);

  // d/dw of <v, d_beta follower(w, beta)>
  const auto inner = [&](const Eigen::VectorXd& wp) {
    return v.dot(ad::gradient(g.follower(), ab(wp, beta), "beta"));
  };
  const Eigen::VectorXd fd = oracle::central_gradient(inner, w);
  const Eigen::VectorXd mixed = ad::mixed_hvp(g.follower(), ab(w, beta), "beta", "alpha", v);
  CHECK((mixed - fd).norm() / fd.norm() <= 1e-6);
}

TEST_CASE("regression spec validation") {
  RegressionGameSpec spec;
  spec.X = Eigen::MatrixXd::Ones(3, 2);
  spec.y = Eigen::VectorXd::Ones(3);
  CHECK_NOTHROW(spec.validate());

  auto bad = spec;
  bad.y = Eigen::VectorXd::Ones(2);
  CHECK_THROWS_AS(regression_game(bad), DimensionError);
  bad = spec;
  bad.c_d = -1.0;
  CHECK_THROWS_AS(regression_game(bad), std::invalid_argument);
  bad = spec;
  bad.c_l = 0.0;
  CHECK_THROWS_AS(regression_game(bad), std::invalid_argument);
  bad = spec;
  bad.rho = -0.1;
  CHECK_THROWS_AS(regression_game(bad), std::invalid_argument);
  bad = spec;
  bad.X = Eigen::MatrixXd(0, 2);
  bad.y = Eigen::VectorXd(0);
  CHECK_THROWS_AS(regression_game(bad), std::invalid_argument);
}

TEST_CASE("row flattening round trip") {
  Eigen::MatrixXd X(2, 3);
  X << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd flat = flatten_rows(X);
  CHECK(flat == vec({1, 2, 3, 4, 5, 6}));
  CHECK(unflatten_rows(flat, 2, 3) == X);
  CHECK_THROWS_AS(unflatten_rows(flat, 4, 2), DimensionError);
}
