#pragma once

#include <cstdint>
#include <vector>

#include "vmfa/dataset.hpp"
#include "vmfa/model.hpp"

namespace vmfa {

struct KmeansState {
  RowMatrixXd centers;                   ///< C x D
  std::vector<std::int32_t> assignments;  ///< nearest center per point
  double inertia = 0.0;                  ///< sum of squared distances
  int iterations = 0;
};

/// Lloyd iterations from the given centers until the largest center movement
/// drops below tol or max_iters is reached, followed by one final assignment
/// pass against the final centers. Every point-center squared distance
/// increments counter.distances (exactly N*C per assignment pass). Empty
/// clusters are re-seeded to the point farthest from its assigned center.
KmeansState kmeans_lloyd(const Dataset& data, int C,
                         const RowMatrixXd& init_centers, int max_iters,
                         double tol, EvalCounter& counter, int threads = 1);

/// Fits one factor analyzer per Voronoi cell of a converged k-means state by
/// running the shared EM machinery with a single component and unit
/// responsibilities, then assembles the mixture with pi_c = |cell| / N.
/// Cells with fewer than two points fall back to their mean with floored
/// variances and zero loadings. FA joint evaluations are added to
/// counter.joints.
MfaParams fit_fa_per_cluster(const Dataset& data, const KmeansState& state,
                             int H, std::uint64_t seed,
                             const Eigen::VectorXd& floor,
                             EvalCounter& counter, double epsilon = 1e-4,
                             int max_fa_iters = 200, int threads = 1);

}  // namespace vmfa
