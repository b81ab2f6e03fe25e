#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sg {

struct FeatureScaling {
  double mean = 0.0;
  double std = 1.0;
};

struct Dataset {
  Eigen::MatrixXd X;  // k x p
  Eigen::VectorXd y;  // k
  std::vector<std::string> feature_names;
  std::vector<FeatureScaling> standardization;  // empty until standardized
  std::size_t rejected_rows = 0;                // rows skipped while parsing
  Eigen::VectorXd true_weights;                 // synthetic data only

  std::size_t rows() const noexcept { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const noexcept { return static_cast<std::size_t>(X.cols()); }

  /// Throws std::invalid_argument on shape mismatch or non-finite entries.
  void validate() const;
};

/// UCI wine-quality layout: ';'-separated, header row, 11 feature columns
/// followed by the quality score. Malformed data rows are skipped and counted
/// in rejected_rows. Throws IoError on a missing file, a header without 12
/// columns, or when no usable row remains.
Dataset load_wine_csv(const std::filesystem::path& path);

/// y = X w + noise with X ~ N(0, 1) and w ~ N(0, 0.3^2 / p), so |w| is
/// about 0.3. The weights are kept in true_weights. Deterministic in seed.
Dataset synth_dataset(std::uint64_t seed, std::size_t k, std::size_t p, double noise_std);

/// Rows of `d` selected by `index` (metadata carried over).
Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& index);

/// Random subset of k rows (all rows when k >= rows()).
Dataset subsample(const Dataset& d, std::size_t k, std::uint64_t seed);

struct Split {
  Dataset train;
  Dataset test;
};

/// Shuffled split with round(train_fraction * k) training rows (at least one
/// row on each side).
Split train_test_split(const Dataset& d, double train_fraction, std::uint64_t seed);

/// Zero mean / unit variance per feature using training statistics only;
/// the same affine map is applied to the test part. Zero-variance training
/// features are dropped from both parts.
Split standardize(const Split& split);

}  // namespace sg
