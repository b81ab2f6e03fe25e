// Exercises the shared library through its public header only.

#include <stackelberg/stackelberg.h>

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::filesystem::path temp_path(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("status helpers") {
  CHECK(std::string(sg_version()).size() > 0);
  CHECK(std::string(sg_status_string(SG_OK)) != std::string(sg_status_string(SG_ERR_IO)));
  CHECK(std::string(sg_status_string(static_cast<sg_status>(99))).size() > 0);
}

TEST_CASE("quadratic game through handles") {
  sg_game* game = nullptr;
  REQUIRE(sg_game_quadratic(2, &game) == SG_OK);
  size_t n = 0, m = 0;
  REQUIRE(sg_game_dims(game, &n, &m) == SG_OK);
  CHECK(n == 2);
  CHECK(m == 2);

  const double alpha0[] = {0.0, 0.0};
  const double beta0[] = {1.0, -1.0};
  double leader = 0.0, follower = 0.0;
  REQUIRE(sg_game_evaluate(game, alpha0, beta0, &leader, &follower) == SG_OK);
  CHECK(leader == -2.0);
  CHECK(follower == -6.0);
  CHECK(sg_game_evaluate(game, alpha0, beta0, nullptr, &follower) == SG_OK);

  sg_solver_config cfg;
  sg_solver_config_default(&cfg);
  CHECK(cfg.inner_steps == 40);
  CHECK(cfg.inner_eta == 0.1);

  const double alpha[] = {1.0, 1.0};
  double grad[2];
  double beta[2];
  sg_hypergradient_info info;
  REQUIRE(sg_hypergradient(game, alpha, &cfg, grad, beta, &info) == SG_OK);
  CHECK(std::abs(grad[0] + 9.0) <= 1e-6);
  CHECK(info.peak_trace_length == 41);
  CHECK(info.not_converged == 0);

  cfg.method = SG_METHOD_FORWARD;
  double fwd[2];
  REQUIRE(sg_hypergradient(game, alpha, &cfg, fwd, nullptr, &info) == SG_OK);
  CHECK(info.peak_trace_length == 2);
  double fd[2];
  REQUIRE(sg_fd_hypergradient(game, alpha, &cfg, 1e-5, fd) == SG_OK);
  CHECK(std::abs(fd[1] - fwd[1]) <= 1e-6);

  cfg.inner_steps = 2;
  double bt[2];
  REQUIRE(sg_inner_ascent(game, alpha, &cfg, bt) == SG_OK);
  CHECK(bt[0] == doctest::Approx(0.84));

  sg_game_free(game);
}

TEST_CASE("solving returns an owned solution") {
  sg_game* game = nullptr;
  REQUIRE(sg_game_quadratic(5, &game) == SG_OK);
  sg_solver_config cfg;
  sg_solver_config_default(&cfg);
  sg_solution* sol = nullptr;
  REQUIRE(sg_solve(game, &cfg, &sol) == SG_OK);
  CHECK(sg_solution_error(sol) == nullptr);
  CHECK(sg_solution_alpha_dim(sol) == 5);
  CHECK(sg_solution_beta_dim(sol) == 5);
  CHECK(sg_solution_epochs(sol) == 41);
  CHECK(sg_solution_peak_trace_length(sol) == 41);
  CHECK(sg_solution_wall_time(sol) > 0.0);

  std::vector<double> alpha(5), path(41), norms(41);
  REQUIRE(sg_solution_final_alpha(sol, alpha.data(), alpha.size()) == SG_OK);
  for (double a : alpha) CHECK(std::abs(a + 3.5) <= 1e-2);
  REQUIRE(sg_solution_leader_path(sol, path.data(), path.size()) == SG_OK);
  REQUIRE(sg_solution_gradient_norms(sol, norms.data(), norms.size()) == SG_OK);
  CHECK(norms.back() < norms.front());

  CHECK(sg_solution_final_beta(sol, alpha.data(), 4) == SG_ERR_DIMENSION);
  CHECK(std::string(sg_last_error()).find("needed") != std::string::npos);

  sg_solution_free(sol);
  sg_game_free(game);
}

TEST_CASE("errors map to status codes") {
  sg_game* game = nullptr;
  CHECK(sg_game_quadratic(0, &game) == SG_ERR_INVALID_ARGUMENT);
  CHECK(game == nullptr);
  CHECK(std::string(sg_last_error()).size() > 0);
  CHECK(sg_game_quadratic(3, nullptr) == SG_ERR_INVALID_ARGUMENT);
  CHECK(sg_game_dims(nullptr, nullptr, nullptr) == SG_ERR_INVALID_ARGUMENT);

  REQUIRE(sg_game_quadratic(2, &game) == SG_OK);
  CHECK(std::string(sg_last_error()).empty());
  sg_solver_config cfg;
  sg_solver_config_default(&cfg);
  const double alpha[] = {1.0, 1.0};
  double grad[2];

  cfg.inner_eta = -1.0;
  CHECK(sg_hypergradient(game, alpha, &cfg, grad, nullptr, nullptr) == SG_ERR_INVALID_ARGUMENT);
  sg_solver_config_default(&cfg);
  const double wrong[] = {0.0, 0.0, 0.0};
  cfg.beta0 = wrong;
  cfg.beta0_len = 3;
  CHECK(sg_hypergradient(game, alpha, &cfg, grad, nullptr, nullptr) == SG_ERR_DIMENSION);

  sg_solver_config_default(&cfg);
  cfg.inner_eta = 1.0;
  cfg.inner_steps = 2000;
  CHECK(sg_hypergradient(game, alpha, &cfg, grad, nullptr, nullptr) == SG_ERR_DIVERGENCE);

  sg_solver_config_default(&cfg);
  cfg.outer_eta = 50.0;
  cfg.outer_steps = 2000;
  sg_solution* sol = nullptr;
  REQUIRE(sg_solve(game, &cfg, &sol) == SG_OK);
  CHECK(sg_solution_error(sol) != nullptr);
  CHECK(sg_solution_epochs(sol) < 2001);
  sg_solution_free(sol);

  sg_dataset* data = nullptr;
  CHECK(sg_dataset_load_wine("/nonexistent/wine.csv", &data) == SG_ERR_IO);
  CHECK(std::string(sg_last_error()).find("/nonexistent/wine.csv") != std::string::npos);

  sg_game_free(game);
  sg_game_free(nullptr);
  sg_dataset_free(nullptr);
  sg_solution_free(nullptr);
}

TEST_CASE("datasets and regression helpers") {
  sg_dataset* wine = nullptr;
  const std::string fixture = std::string(SG_TEST_DATA_DIR) + "/wine_one_malformed.csv";
  REQUIRE(sg_dataset_load_wine(fixture.c_str(), &wine) == SG_OK);
  CHECK(sg_dataset_rows(wine) == 9);
  CHECK(sg_dataset_cols(wine) == 11);
  CHECK(sg_dataset_rejected_rows(wine) == 1);
  std::vector<double> X(99), y(9);
  REQUIRE(sg_dataset_copy_X(wine, X.data(), X.size()) == SG_OK);
  REQUIRE(sg_dataset_copy_y(wine, y.data(), y.size()) == SG_OK);
  CHECK(X[0] == 7.0);
  CHECK(X[11] == 6.3);  // row-major
  CHECK(y[2] == 5.0);
  sg_dataset_free(wine);

  // X = I, so ridge with rho = 0 returns y.
  const double eye[] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const double target[] = {2.0, -1.0, 0.5};
  sg_dataset* d = nullptr;
  REQUIRE(sg_dataset_from_arrays(eye, target, 3, 3, &d) == SG_OK);
  double w[3];
  REQUIRE(sg_ridge_fit(d, 0.0, w) == SG_OK);
  CHECK(w[0] == doctest::Approx(2.0));
  CHECK(w[1] == doctest::Approx(-1.0));

  double rmse = 0.0;
  REQUIRE(sg_evaluate_under_attack(w, 3, d, 0.0, &rmse) == SG_OK);
  CHECK(rmse <= 1e-12);
  CHECK(sg_evaluate_under_attack(w, 2, d, 0.0, &rmse) == SG_ERR_DIMENSION);
  sg_dataset_free(d);

  const double x[] = {1.0, 1.0};
  const double w2[] = {1.0, 0.0};
  double xbar[2];
  REQUIRE(sg_attacker_closed_form(x, 1, 2, w2, 1.0, xbar) == SG_OK);
  CHECK(xbar[0] == doctest::Approx(0.5));
  CHECK(xbar[1] == doctest::Approx(1.0));
  CHECK(sg_attacker_closed_form(x, 1, 2, w2, -1.0, xbar) == SG_ERR_INVALID_ARGUMENT);
}

TEST_CASE("regression game and Nash training") {
  sg_dataset* d = nullptr;
  REQUIRE(sg_dataset_synthetic(3, 20, 2, 0.1, &d) == SG_OK);
  CHECK(sg_dataset_rows(d) == 20);

  sg_game* game = nullptr;
  REQUIRE(sg_game_regression(d, 1.0, 1.0, 0.1, &game) == SG_OK);
  size_t n = 0, m = 0;
  sg_game_dims(game, &n, &m);
  CHECK(n == 2);
  CHECK(m == 40);
  sg_game_free(game);
  CHECK(sg_game_regression(d, -1.0, 1.0, 0.1, &game) == SG_ERR_INVALID_ARGUMENT);

  sg_solver_config cfg;
  sg_solver_config_regression_default(&cfg);
  CHECK(cfg.inner_steps == 100);
  CHECK(cfg.outer_steps == 350);
  CHECK(cfg.outer_eta == 1e-6);
  cfg.inner_steps = 20;
  cfg.inner_eta = 0.05;
  cfg.outer_steps = 50;
  cfg.outer_eta = 1e-2;
  double w[2];
  sg_solution* sol = nullptr;
  REQUIRE(sg_nash_train(d, 1.0, &cfg, 0.1, 1.0, w, &sol) == SG_OK);
  std::vector<double> path(sg_solution_epochs(sol));
  REQUIRE(sg_solution_leader_path(sol, path.data(), path.size()) == SG_OK);
  CHECK(path.back() < path.front());
  sg_solution_free(sol);
  CHECK(sg_nash_train(d, 1.0, &cfg, 0.1, 1.0, w, nullptr) == SG_OK);
  sg_dataset_free(d);
}

TEST_CASE("experiment runners write CSV") {
  const auto out = temp_path("sg_capi_quadratic.csv");
  sg_quadratic_options q;
  sg_quadratic_options_default(&q);
  const size_t dims[] = {3};
  q.dims = dims;
  q.dims_len = 1;
  q.repeats = 1;
  sg_quadratic_summary qs;
  REQUIRE(sg_run_quadratic(&q, out.c_str(), &qs) == SG_OK);
  CHECK(qs.rows == 2);
  CHECK(qs.error_rows == 0);
  CHECK(qs.max_alpha_error <= 1e-2);
  const std::string csv = read_file(out);
  CHECK(csv.rfind("dim,method,median_seconds,alpha_max_abs_error,trace_length", 0) == 0);
  std::filesystem::remove(out);

  CHECK(sg_run_quadratic(&q, "/nonexistent/dir/out.csv", &qs) == SG_ERR_IO);

  sg_gradcheck_options g;
  sg_gradcheck_options_default(&g);
  sg_gradcheck_report r;
  REQUIRE(sg_run_gradcheck(&g, &r) == SG_OK);
  CHECK(r.fd_ok == 1);
  CHECK(r.exact_ok == 1);
  CHECK(r.gap_ok == 1);
  CHECK(r.etas[2] == 0.025);

  sg_convergence_options c;
  sg_convergence_options_default(&c);
  c.data.synthetic_rows = 60;
  c.data.synthetic_features = 2;
  c.num_inits = 2;
  c.experiment.holdout_repetitions = 2;
  c.experiment.solver.outer_steps = 5;
  c.experiment.solver.inner_steps = 5;
  const auto conv = temp_path("sg_capi_convergence.csv");
  sg_convergence_summary cs;
  REQUIRE(sg_run_convergence(&c, conv.c_str(), &cs) == SG_OK);
  CHECK(cs.paths == 2);
  CHECK(cs.epochs == 6);
  CHECK(read_file(conv).rfind("epoch,init_0,init_1\n", 0) == 0);
  std::filesystem::remove(conv);

  sg_regression_options ro;
  sg_regression_options_default(&ro);
  ro.data.synthetic_rows = 60;
  ro.data.synthetic_features = 2;
  const double grid[] = {0.0, 1.0};
  ro.cd_grid = grid;
  ro.cd_grid_len = 2;
  ro.experiment.holdout_repetitions = 2;
  ro.experiment.solver.outer_steps = 5;
  ro.experiment.solver.inner_steps = 5;
  sg_regression_summary rs;
  REQUIRE(sg_run_regression(&ro, nullptr, &rs) == SG_OK);
  CHECK(rs.rows == 2);  // one seed per c_d value
  const double bad[] = {-1.0};
  ro.cd_grid = bad;
  ro.cd_grid_len = 1;
  CHECK(sg_run_regression(&ro, nullptr, &rs) == SG_ERR_INVALID_ARGUMENT);
}
