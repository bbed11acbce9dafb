// Independent dense-covariance reference implementations used only by the
// test suites. Everything here assembles Sigma_c explicitly and goes through
// generic dense factorizations, deliberately avoiding the low-rank code paths
// under test.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "vmfa/dataset.hpp"
#include "vmfa/model.hpp"
#include "vmfa/numerics.hpp"
#include "vmfa/rng.hpp"

namespace oracle {

inline Eigen::MatrixXd dense_sigma(const vmfa::MfaParams& params, int c) {
  const Eigen::MatrixXd& lam = params.Lambda[c];
  Eigen::MatrixXd sigma = lam * lam.transpose();
  sigma += params.dnoise.row(c).transpose().asDiagonal();
  return sigma;
}

inline double dense_logdet(const Eigen::MatrixXd& m) {
  return std::log(Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant());
}

/// log p(c, x | Theta) via explicit Sigma and a dense solve.
inline double dense_log_joint(const vmfa::MfaParams& params, int c,
                              const Eigen::VectorXd& x) {
  const Eigen::MatrixXd sigma = dense_sigma(params, c);
  const Eigen::VectorXd diff = x - params.mu.row(c).transpose();
  const double mahal = diff.dot(sigma.ldlt().solve(diff));
  return std::log(params.pi[c]) -
         0.5 * (params.D * vmfa::kLog2Pi + dense_logdet(sigma) + mahal);
}

/// Naive double-loop log-likelihood with dense covariances.
inline double dense_log_likelihood(const vmfa::MfaParams& params,
                                   const vmfa::Dataset& data) {
  double total = 0.0;
  std::vector<double> lj(params.C);
  for (std::int64_t n = 0; n < data.size(); ++n) {
    const Eigen::VectorXd x = data.row(n).cast<double>().transpose();
    for (int c = 0; c < params.C; ++c) lj[c] = dense_log_joint(params, c, x);
    total += vmfa::log_sum_exp(lj);
  }
  return total;
}

/// Naive truncated free energy over explicit index sets.
inline double dense_free_energy(
    const vmfa::MfaParams& params, const vmfa::Dataset& data,
    const std::vector<std::vector<std::int32_t>>& ksets) {
  double total = 0.0;
  for (std::int64_t n = 0; n < data.size(); ++n) {
    const Eigen::VectorXd x = data.row(n).cast<double>().transpose();
    std::vector<double> lj;
    for (std::int32_t c : ksets[n]) lj.push_back(dense_log_joint(params, c, x));
    total += vmfa::log_sum_exp(lj);
  }
  return total;
}

/// Closed-form KL divergence between two Gaussian components,
/// KL(N_a || N_b), with dense covariances.
inline double gaussian_kl(const vmfa::MfaParams& params, int a, int b) {
  const int d = params.D;
  const Eigen::MatrixXd sa = dense_sigma(params, a);
  const Eigen::MatrixXd sb = dense_sigma(params, b);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt_b(sb);
  const Eigen::VectorXd dm =
      (params.mu.row(b) - params.mu.row(a)).transpose();
  const double trace_term = ldlt_b.solve(sa).trace();
  const double mahal = dm.dot(ldlt_b.solve(dm));
  return 0.5 * (trace_term + mahal - d + dense_logdet(sb) - dense_logdet(sa));
}

/// Random valid parameters for property tests.
inline vmfa::MfaParams random_params(int C, int D, int H, vmfa::Rng& rng,
                                     double mean_spread = 3.0) {
  vmfa::MfaParams params;
  params.C = C;
  params.D = D;
  params.H = H;
  params.pi.resize(C);
  for (int c = 0; c < C; ++c) params.pi[c] = rng.uniform(0.2, 1.0);
  params.pi /= params.pi.sum();
  params.mu = vmfa::RowMatrixXd(C, D);
  params.dnoise = vmfa::RowMatrixXd(C, D);
  params.Lambda.assign(C, Eigen::MatrixXd(D, H));
  for (int c = 0; c < C; ++c) {
    for (int d = 0; d < D; ++d) {
      params.mu(c, d) = mean_spread * rng.gaussian();
      params.dnoise(c, d) = rng.uniform(0.2, 2.0);
    }
    for (int d = 0; d < D; ++d) {
      for (int h = 0; h < H; ++h) params.Lambda[c](d, h) = rng.gaussian();
    }
  }
  params.validate();
  return params;
}

inline vmfa::Dataset random_dataset(std::int64_t n, int d, vmfa::Rng& rng,
                                    double spread = 3.0) {
  vmfa::Dataset::Storage rows(n, d);
  for (std::int64_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) {
      rows(i, j) = static_cast<float>(spread * rng.gaussian());
    }
  }
  return vmfa::Dataset(std::move(rows));
}

}  // namespace oracle
