#include "dataset.hpp"

#include "errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string_view>

namespace sg {

namespace {

constexpr std::size_t kWineColumns = 12;

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '"' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

void Dataset::validate() const {
  if (y.size() != X.rows()) throw std::invalid_argument("dataset: X and y row counts differ");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset: non-finite entry");
  if (!feature_names.empty() && feature_names.size() != cols()) {
    throw std::invalid_argument("dataset: feature name count does not match columns");
  }
}

Dataset load_wine_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw IoError("data file '" + path.string() + "' is empty");
  const auto header = split_fields(line, ';');
  if (header.size() != kWineColumns) {
    throw IoError("data file '" + path.string() + "' has " + std::to_string(header.size()) +
                  " columns, expected " + std::to_string(kWineColumns));
  }

  Dataset d;
  for (std::size_t j = 0; j + 1 < header.size(); ++j) d.feature_names.emplace_back(trim(header[j]));

  std::vector<double> values;
  std::vector<double> targets;
  std::vector<double> row(kWineColumns);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line, ';');
    bool ok = fields.size() == kWineColumns;
    for (std::size_t j = 0; ok && j < kWineColumns; ++j) ok = parse_double(fields[j], row[j]);
    if (!ok) {
      ++d.rejected_rows;
      continue;
    }
    values.insert(values.end(), row.begin(), row.end() - 1);
    targets.push_back(row.back());
  }
  if (targets.empty()) throw IoError("data file '" + path.string() + "' has no usable rows");

  const auto k = static_cast<Eigen::Index>(targets.size());
  const auto p = static_cast<Eigen::Index>(kWineColumns - 1);
  d.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), k, p);
  d.y = Eigen::Map<const Eigen::VectorXd>(targets.data(), k);
  return d;
}

Dataset synth_dataset(std::uint64_t seed, std::size_t k, std::size_t p, double noise_std) {
  if (k < 1 || p < 1) throw std::invalid_argument("synth_dataset: k and p must be >= 1");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("synth_dataset: noise_std must be >= 0");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double weight_std = 0.3 / std::sqrt(static_cast<double>(p));

  Dataset d;
  d.true_weights.resize(static_cast<Eigen::Index>(p));
  for (auto& w : d.true_weights) w = weight_std * normal(rng);
  d.X.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < d.X.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) d.X(i, j) = normal(rng);
  }
  d.y = d.X * d.true_weights;
  if (noise_std > 0.0) {
    for (auto& v : d.y) v += noise_std * normal(rng);
  }
  for (std::size_t j = 0; j < p; ++j) d.feature_names.push_back("x" + std::to_string(j));
  return d;
}

Dataset select_rows(const Dataset& d, const std::vector<std::size_t>& index) {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(index.size()), d.X.cols());
  out.y.resize(static_cast<Eigen::Index>(index.size()));
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(static_cast<Eigen::Index>(index[i]));
    out.y[static_cast<Eigen::Index>(i)] = d.y[static_cast<Eigen::Index>(index[i])];
  }
  out.feature_names = d.feature_names;
  out.standardization = d.standardization;
  out.true_weights = d.true_weights;
  return out;
}

Dataset subsample(const Dataset& d, std::size_t k, std::uint64_t seed) {
  if (k >= d.rows()) return d;
  std::vector<std::size_t> index(d.rows());
  std::iota(index.begin(), index.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  index.resize(k);
  std::sort(index.begin(), index.end());
  return select_rows(d, index);
}

Split train_test_split(const Dataset& d, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_test_split: fraction must lie in (0, 1)");
  }
  if (d.rows() < 2) throw std::invalid_argument("train_test_split: need at least two rows");
  std::vector<std::size_t> index(d.rows());
  std::iota(index.begin(), index.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(index.begin(), index.end(), rng);
  auto n_train = static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(d.rows())));
  n_train = std::clamp<std::size_t>(n_train, 1, d.rows() - 1);
  std::vector<std::size_t> train(index.begin(), index.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(index.begin() + static_cast<std::ptrdiff_t>(n_train), index.end());
  return {select_rows(d, train), select_rows(d, test)};
}

Split standardize(const Split& split) {
  const Dataset& train = split.train;
  if (train.rows() < 2) throw std::invalid_argument("standardize: need at least two training rows");
  if (split.test.cols() != train.cols()) throw DimensionError("standardize: column mismatch");

  std::vector<Eigen::Index> keep;
  std::vector<FeatureScaling> scaling;
  const double k = static_cast<double>(train.rows());
  for (Eigen::Index j = 0; j < train.X.cols(); ++j) {
    const double mean = train.X.col(j).mean();
    const double var = (train.X.col(j).array() - mean).square().sum() / (k - 1.0);
    if (!(var > 0.0)) continue;
    keep.push_back(j);
    scaling.push_back({mean, std::sqrt(var)});
  }
  if (keep.empty()) throw NumericError("standardize: every feature has zero variance");

  auto apply = [&](const Dataset& d) {
    Dataset out;
    out.X.resize(d.X.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c) {
      out.X.col(static_cast<Eigen::Index>(c)) =
          (d.X.col(keep[c]).array() - scaling[c].mean) / scaling[c].std;
    }
    out.y = d.y;
    for (Eigen::Index j : keep) {
      if (!d.feature_names.empty()) out.feature_names.push_back(d.feature_names[static_cast<std::size_t>(j)]);
    }
    out.standardization = scaling;
    out.rejected_rows = d.rejected_rows;
    return out;
  };
  return {apply(split.train), apply(split.test)};
}

}  // namespace sg
