#include "vmfa/dataset.hpp"

#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vmfa/rng.hpp"

namespace vmfa {

Dataset::Dataset(Storage rows, std::string split)
    : rows_(std::move(rows)), split_(std::move(split)) {
  if (rows_.rows() < 1 || rows_.cols() < 1) {
    throw std::invalid_argument("dataset must have N >= 1 and D >= 1");
  }
  if (!rows_.allFinite()) {
    throw std::invalid_argument("dataset contains non-finite values");
  }
}

Eigen::VectorXd per_dimension_variance(const Dataset& data) {
  const std::int64_t n = data.size();
  const int d = data.dim();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (std::int64_t i = 0; i < n; ++i) {
    mean += data.row(i).cast<double>().transpose();
  }
  mean /= static_cast<double>(n);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (std::int64_t i = 0; i < n; ++i) {
    var += (data.row(i).cast<double>().transpose() - mean).cwiseAbs2();
  }
  return var / static_cast<double>(n);
}

Eigen::VectorXd variance_floor(const Dataset& data) {
  return (1e-6 * per_dimension_variance(data).array()).max(1e-8).matrix();
}

Dataset subsample(const Dataset& data, std::int64_t m, std::uint64_t seed) {
  const std::int64_t n = data.size();
  if (m < 1 || m > n) throw std::invalid_argument("subsample size out of range");
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hash_combine(seed, 0x5ab5a3b1eULL));
  for (std::int64_t i = 0; i < m; ++i) {
    const std::int64_t j = i + rng.uniform_int(n - i);
    std::swap(order[i], order[j]);
  }
  Dataset::Storage rows(m, data.dim());
  for (std::int64_t i = 0; i < m; ++i) rows.row(i) = data.row(order[i]);
  return Dataset(std::move(rows), data.split());
}

}  // namespace vmfa
