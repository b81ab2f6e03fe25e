#include "game.hpp"

#include "errors.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace sg {

DifferentiableGame::DifferentiableGame(std::size_t n, std::size_t m,
                                       ad::ScalarFunction leader,
                                       ad::ScalarFunction follower, Sense sense)
    : n_(n), m_(m), leader_(std::move(leader)), follower_(std::move(follower)), sense_(sense) {
  if (n == 0 || m == 0) throw std::invalid_argument("game: decision dimensions must be positive");
  for (const ad::ScalarFunction* f : {&leader_, &follower_}) {
    const auto& blocks = f->blocks();
    if (blocks.size() != 2 || blocks[kAlpha].name != "alpha" || blocks[kBeta].name != "beta" ||
        blocks[kAlpha].dim != n || blocks[kBeta].dim != m) {
      throw DimensionError("game: objectives must take exactly (alpha:" + std::to_string(n) +
                           ", beta:" + std::to_string(m) + ")");
    }
  }
}

ad::ScalarFunction game_objective(std::size_t n, std::size_t m, ad::Evaluator evaluator) {
  return ad::ScalarFunction({{"alpha", n}, {"beta", m}}, std::move(evaluator));
}

DifferentiableGame quadratic_game(std::size_t n) {
  if (n == 0) throw std::invalid_argument("quadratic_game: n must be at least 1");

  auto follower = game_objective(n, n, [](ad::Tape&, const ad::BlockVars& v) {
    return -3.0 * ad::squared_distance(v[0], v[1]);
  });
  auto leader = game_objective(n, n, [](ad::Tape&, const ad::BlockVars& v) {
    return -(7.0 * ad::sum(v[0]) + ad::squared_norm(v[1]));
  });
  return DifferentiableGame(n, n, std::move(leader), std::move(follower), Sense::Maximize);
}

void RegressionGameSpec::validate() const {
  if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("regression game: empty design matrix");
  if (y.size() != X.rows()) {
    throw DimensionError("regression game: y has " + std::to_string(y.size()) +
                         " entries for " + std::to_string(X.rows()) + " rows");
  }
  if (!(c_d >= 0.0)) throw std::invalid_argument("regression game: c_d must be >= 0");
  if (!(c_l > 0.0)) throw std::invalid_argument("regression game: c_l must be > 0");
  if (!(rho >= 0.0)) throw std::invalid_argument("regression game: rho must be >= 0");
  if (!X.allFinite() || !y.allFinite() || !std::isfinite(z)) {
    throw std::invalid_argument("regression game: non-finite data");
  }
}

namespace {

struct RegressionData {
  std::size_t k = 0;
  std::size_t p = 0;
  std::vector<double> x_flat;  // row-major
  std::vector<double> y;
  std::vector<double> z;
  double c_d = 0.0;
  double c_l = 0.0;
  double rho = 0.0;
};

// Predictions xbar_i . w, one Dot node per instance.
std::vector<ad::Var> predictions(const RegressionData& d, const ad::BlockVars& v) {
  auto w = v[0];
  auto xbar = v[1];
  std::vector<ad::Var> pred;
  pred.reserve(d.k);
  for (std::size_t i = 0; i < d.k; ++i) pred.push_back(ad::dot(xbar.subspan(i * d.p, d.p), w));
  return pred;
}

}  // namespace

DifferentiableGame regression_game(const RegressionGameSpec& spec) {
  spec.validate();
  auto data = std::make_shared<RegressionData>();
  data->k = static_cast<std::size_t>(spec.X.rows());
  data->p = static_cast<std::size_t>(spec.X.cols());
  const Eigen::VectorXd flat = flatten_rows(spec.X);
  data->x_flat.assign(flat.begin(), flat.end());
  data->y.assign(spec.y.begin(), spec.y.end());
  data->z.assign(data->k, spec.z);
  data->c_d = spec.c_d;
  data->c_l = spec.c_l;
  data->rho = spec.rho;

  const std::size_t n = data->p;
  const std::size_t m = data->k * data->p;

  auto leader = game_objective(n, m, [data](ad::Tape&, const ad::BlockVars& v) {
    const auto pred = predictions(*data, v);
    ad::Var cost = data->c_l * ad::squared_distance(pred, data->y);
    if (data->rho != 0.0) cost = cost + data->rho * ad::squared_norm(v[0]);
    return cost;
  });
  auto follower = game_objective(n, m, [data](ad::Tape&, const ad::BlockVars& v) {
    ad::Var transform = ad::squared_distance(v[1], data->x_flat);
    if (data->c_d == 0.0) return transform;
    const auto pred = predictions(*data, v);
    return data->c_d * ad::squared_distance(pred, data->z) + transform;
  });
  return DifferentiableGame(n, m, std::move(leader), std::move(follower), Sense::Minimize);
}

Eigen::VectorXd flatten_rows(const Eigen::MatrixXd& X) {
  Eigen::VectorXd v(X.size());
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) v[idx++] = X(i, j);
  }
  return v;
}

Eigen::MatrixXd unflatten_rows(const Eigen::VectorXd& v, std::size_t rows, std::size_t cols) {
  if (static_cast<std::size_t>(v.size()) != rows * cols) {
    throw DimensionError("unflatten_rows: size mismatch");
  }
  Eigen::MatrixXd X(rows, cols);
  Eigen::Index idx = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) X(i, j) = v[idx++];
  }
  return X;
}

ObjectivePair evaluate_pair(const DifferentiableGame& game, const Eigen::VectorXd& alpha,
                            const Eigen::VectorXd& beta) {
  const std::span<const double> in[2] = {{alpha.data(), static_cast<std::size_t>(alpha.size())},
                                         {beta.data(), static_cast<std::size_t>(beta.size())}};
  ad::Tape tape;
  ObjectivePair out;
  out.leader = game.leader().record(tape, in).value();
  out.follower = game.follower().record(tape, in).value();
  return out;
}

}  // namespace sg
