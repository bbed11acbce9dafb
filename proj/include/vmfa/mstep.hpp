#pragma once

#include <cstdint>
#include <vector>

#include "vmfa/model.hpp"

namespace vmfa {

/// Sufficient statistics of one variational M-step. Per component:
/// N_c = sum_n q_n(c), Y_c = sum_n q_n(c) x_n E[zhat]^T (D x (H+1)),
/// E_c = sum_n q_n(c) E[zhat zhat^T] ((H+1) x (H+1)), and the weighted
/// squared sums per dimension.
struct SuffStats {
  Eigen::VectorXd Nc;
  std::vector<Eigen::MatrixXd> Y;
  std::vector<Eigen::MatrixXd> E;
  RowMatrixXd sq_sum;  ///< C x D

  void init(int C, int D, int H);
  SuffStats& operator+=(const SuffStats& o);
};

/// Accumulates statistics from truncated responsibilities, summing per point
/// only over the components of its K row. `caches` must belong to the same
/// (pre-update) parameters the responsibilities were computed under.
SuffStats accumulate_suffstats(const MfaParams& params,
                               const std::vector<ComponentCache>& caches,
                               const Dataset& data, const KCollection& ksets,
                               const std::vector<double>& resp,
                               int threads = 1);

/// Closed-form parameter update: pi_c = N_c/N, A_c = Y_c E_c^-1 with
/// Lambda/mu read off A_c's columns, and the diagonal variance update with
/// the new A_c. Components with N_c == 0 keep their previous parameters and
/// get pi_c = 0 (frozen); the remaining pi are renormalized. Variances are
/// clamped at the per-dimension floor. Throws SingularEc if E_c stays
/// unusable after one trace-scaled jitter.
MfaParams update_params(const SuffStats& stats, std::int64_t n_points,
                        const MfaParams& previous,
                        const Eigen::VectorXd& floor);

/// Fused exact E-step for the full-EM baseline: evaluates all N*C joints
/// (counted), accumulates dense-responsibility statistics on the fly and
/// returns the data log-likelihood at the current parameters.
double em_full_step(const MfaParams& params,
                    const std::vector<ComponentCache>& caches,
                    const Dataset& data, SuffStats& stats,
                    EvalCounter& counter, int threads = 1);

}  // namespace vmfa
