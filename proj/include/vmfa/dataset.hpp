#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace vmfa {

/// Dense N x D dataset. Rows are stored in single precision; all probability
/// arithmetic downstream accumulates in double.
class Dataset {
 public:
  using Storage =
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Dataset() = default;

  /// Throws std::invalid_argument on empty or non-finite input.
  explicit Dataset(Storage rows, std::string split = {});

  std::int64_t size() const { return rows_.rows(); }
  int dim() const { return static_cast<int>(rows_.cols()); }

  Eigen::Map<const Eigen::RowVectorXf> row(std::int64_t n) const {
    return Eigen::Map<const Eigen::RowVectorXf>(rows_.data() + n * rows_.cols(),
                                                rows_.cols());
  }

  const Storage& values() const { return rows_; }
  const std::string& split() const { return split_; }

 private:
  Storage rows_;
  std::string split_;
};

/// Biased (1/N) per-dimension variance across all rows, in double.
Eigen::VectorXd per_dimension_variance(const Dataset& data);

/// Per-dimension variance floor: max(1e-8, 1e-6 * global variance along d).
Eigen::VectorXd variance_floor(const Dataset& data);

/// Uniform subsample of m rows without replacement, deterministic in seed.
Dataset subsample(const Dataset& data, std::int64_t m, std::uint64_t seed);

}  // namespace vmfa
