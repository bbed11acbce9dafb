#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <vector>

#include "vmfa/dataset.hpp"

namespace vmfa {

using RowMatrixXd =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// All model parameters of a mixture of factor analyzers: mixing weights,
/// means, factor loadings and diagonal noise variances. Each component's
/// covariance is Lambda_c Lambda_c^T + diag(dnoise_c). Immutable by
/// convention once training hands it out; safe to share across threads.
struct MfaParams {
  int C = 0;  ///< number of components
  int D = 0;  ///< data dimensionality
  int H = 0;  ///< latent (hyperplane) dimensionality, 1 <= H <= D

  Eigen::VectorXd pi;                   ///< C mixing proportions, sum 1
  RowMatrixXd mu;                       ///< C x D means
  std::vector<Eigen::MatrixXd> Lambda;  ///< C loadings, each D x H
  RowMatrixXd dnoise;                   ///< C x D noise variances sigma^2

  /// Throws std::invalid_argument if shapes, finiteness, the simplex
  /// constraint on pi (1e-12) or positivity of the variances are violated.
  void validate() const;
};

/// Per-component quantities derived from MfaParams that make one log-joint
/// evaluation O(DH): the Woodbury factors of Sigma_c^-1 and the
/// determinant-lemma value of log|Sigma_c|.
struct ComponentCache {
  Eigen::MatrixXd U;        ///< D x H,  D_c^-1 Lambda_c
  Eigen::MatrixXd Lmat;     ///< H x H,  I + Lambda_c^T D_c^-1 Lambda_c
  Eigen::MatrixXd V;        ///< H x D,  L_c^-1 U_c^T
  Eigen::MatrixXd Sigma_z;  ///< H x H,  L_c^-1 (latent posterior covariance)
  Eigen::VectorXd inv_dnoise;  ///< D,   1 / sigma^2_{c,d}
  double logdet_sigma = 0.0;   ///< log|Sigma_c| = log|L_c| + sum_d log sigma^2
  double log_pi = 0.0;         ///< log pi_c; -inf for a frozen empty component
};

/// Tallies of the cost units used in the scaling experiments. Plain counters:
/// parallel code keeps one per worker and merges at the end of a step.
struct EvalCounter {
  std::uint64_t joints = 0;     ///< log-joint evaluations
  std::uint64_t distances = 0;  ///< squared Euclidean distance evaluations

  EvalCounter& operator+=(const EvalCounter& o) {
    joints += o.joints;
    distances += o.distances;
    return *this;
  }
};

/// Reusable buffers for log_joint so the O(DH) hot path does not allocate.
struct JointScratch {
  Eigen::VectorXd v;  // D
  Eigen::VectorXd a;  // H
  Eigen::VectorXd b;  // H

  void resize(int D, int H) {
    v.resize(D);
    a.resize(H);
    b.resize(H);
  }
};

/// Builds the cache for component c in O(DH^2 + H^3). L_c is factorized by
/// Cholesky; on failure one retry with 1e-10 jitter on the diagonal is made
/// before CholeskyFailure is thrown.
ComponentCache precompute_component(const MfaParams& params, int c);

std::vector<ComponentCache> precompute_all(const MfaParams& params);

/// log p(c, x | Theta) in O(DH) via the Woodbury form of the Mahalanobis
/// distance: v^T Sigma^-1 v = v^T D^-1 v - (v^T U)(V v). Increments
/// counter.joints by exactly one.
double log_joint(const ComponentCache& cache,
                 Eigen::Ref<const Eigen::RowVectorXd> mu_c,
                 Eigen::Map<const Eigen::RowVectorXf> x, JointScratch& scratch,
                 EvalCounter& counter);

/// Collection of truncated index sets: one row of exactly Cprime distinct
/// component indices per data point.
struct KCollection {
  int Cprime = 0;
  std::vector<std::int32_t> idx;  ///< row-major, N * Cprime

  std::int64_t size() const {
    return Cprime > 0 ? static_cast<std::int64_t>(idx.size()) / Cprime : 0;
  }
  std::span<const std::int32_t> row(std::int64_t n) const {
    return {idx.data() + n * Cprime, static_cast<std::size_t>(Cprime)};
  }
  std::span<std::int32_t> row(std::int64_t n) {
    return {idx.data() + n * Cprime, static_cast<std::size_t>(Cprime)};
  }
};

/// Exact data log-likelihood: sum_n log sum_c exp(log_joint), log-domain over
/// all C components. Adds exactly N*C to counter.joints. Reduction order is
/// fixed for a given thread count.
double exact_log_likelihood(const MfaParams& params,
                            const std::vector<ComponentCache>& caches,
                            const Dataset& data, EvalCounter& counter,
                            int threads = 1);

/// Truncated free energy: sum_n log sum_{c in K^(n)} exp(log_joint). Always a
/// lower bound on exact_log_likelihood. Throws EmptyKSet on an empty
/// collection. Adds N*Cprime to counter.joints.
double truncated_free_energy(const MfaParams& params,
                             const std::vector<ComponentCache>& caches,
                             const Dataset& data, const KCollection& ksets,
                             EvalCounter& counter, int threads = 1);

}  // namespace vmfa
