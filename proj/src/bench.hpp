#pragma once

// Experiment drivers behind the command-line tool. Each driver returns
// plain result rows; the write_* functions own the CSV column contracts
// documented in README.md.

#include "adversarial_regression.hpp"
#include "solvers.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace sg::bench {

/// One self-describing output row: parameters are enough to replay it.
struct BenchRecord {
  std::string experiment;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::pair<std::string, std::string>> metrics;
  std::string seed;
  std::string timestamp;
};

/// Writes records as CSV with the given column order. Every column must be
/// found among seed/timestamp/parameters/metrics of each record (missing
/// entries are written empty).
void write_csv(std::ostream& out, const std::vector<std::string>& columns,
               const std::vector<BenchRecord>& records);

std::string utc_timestamp();
std::string format_double(double v);
std::string method_name(HypergradientMethod m);

// --------------------------------------------------------------- quadratic

struct QuadraticOptions {
  std::vector<std::size_t> dims{2, 4, 8, 16, 32, 64};
  std::vector<HypergradientMethod> methods{HypergradientMethod::Backward,
                                           HypergradientMethod::Forward};
  std::size_t inner_steps = 40;
  double inner_eta = 0.1;
  std::size_t outer_steps = 40;
  double outer_eta = 0.1;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
};

struct QuadraticRow {
  std::size_t dim = 0;
  HypergradientMethod method = HypergradientMethod::Backward;
  double median_seconds = 0.0;
  double alpha_max_abs_error = 0.0;
  double beta_max_abs_error = 0.0;
  std::size_t trace_length = 0;
  std::optional<std::string> error;
};

std::vector<QuadraticRow> run_quadratic(const QuadraticOptions& options);
const std::vector<std::string>& quadratic_columns();
std::vector<BenchRecord> quadratic_records(const QuadraticOptions& options,
                                           const std::vector<QuadraticRow>& rows);

// -------------------------------------------------------------- regression

struct DataSource {
  std::optional<std::filesystem::path> wine_csv;  // unset: synthetic data
  std::size_t synthetic_rows = 300;
  std::size_t synthetic_features = 11;
  double synthetic_noise = 0.1;
  std::size_t subsample = 0;  // 0: keep every row
};

Dataset load_data(const DataSource& source, std::uint64_t seed);

struct RegressionOptions {
  DataSource data;
  std::vector<double> cd_grid = default_cd_grid();
  std::vector<std::uint64_t> seeds{0};
  RegressionExperimentConfig experiment;
};

std::vector<ExperimentResult> run_regression(const RegressionOptions& options);
const std::vector<std::string>& regression_columns();
/// Per-seed rows followed by one "mean" row per c_d.
std::vector<BenchRecord> regression_records(const RegressionOptions& options,
                                            const std::vector<ExperimentResult>& results);

// ------------------------------------------------------------- convergence

struct ConvergenceOptions {
  DataSource data;
  std::size_t num_inits = 20;
  std::uint64_t seed = 0;
  double c_d = 0.5;
  RegressionExperimentConfig experiment;
};

struct ConvergenceResult {
  std::vector<std::vector<double>> paths;  // per initialization, per epoch
  std::vector<std::optional<std::string>> errors;
  double rho = 0.0;
  double best_final = 0.0;
  double worst_final = 0.0;
};

/// Nash training of the regression game from num_inits standard-normal
/// leader initializations, recording the leader cost per outer epoch.
ConvergenceResult run_convergence(const ConvergenceOptions& options);

/// Wide CSV: column "epoch" then one "init_<i>" column per path.
void write_convergence_csv(std::ostream& out, const ConvergenceResult& result);

// --------------------------------------------------------------- gradcheck

enum class GameSelector { Quadratic, Regression };

struct GradcheckOptions {
  GameSelector game = GameSelector::Quadratic;
  std::size_t dim = 3;   // n for quadratic, features for regression
  std::size_t rows = 20;  // regression instances
  double c_d = 1.0;
  std::size_t inner_steps = 40;
  double inner_eta = 0.1;
  double tolerance = 1e-5;        // forward vs finite differences
  double exact_tolerance = 1e-9;  // current-iterate backward vs forward
  std::uint64_t seed = 0;
};

struct GradcheckReport {
  double fd_vs_forward = 0.0;
  double exact_backward_vs_forward = 0.0;
  std::vector<double> etas;
  std::vector<double> faithful_gaps;  // paper-faithful backward vs forward
  bool fd_ok = false;
  bool exact_ok = false;
  bool gap_ok = false;

  bool passed() const { return fd_ok && exact_ok && gap_ok; }
};

/// |a - b| / (1 + |b|).
double relative_gap(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Gaps below this are treated as rounding noise when checking that the
/// paper-faithful discrepancy shrinks with eta.
inline constexpr double kGapNoiseFloor = 1e-12;

GradcheckReport run_gradcheck(const GradcheckOptions& options);

}  // namespace sg::bench
