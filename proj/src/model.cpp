#include "vmfa/model.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vmfa/errors.hpp"
#include "vmfa/numerics.hpp"
#include "vmfa/parallel.hpp"

namespace vmfa {

void MfaParams::validate() const {
  if (C < 1 || D < 1 || H < 1 || H > D) {
    throw std::invalid_argument("invalid model sizes C/D/H");
  }
  if (pi.size() != C || mu.rows() != C || mu.cols() != D ||
      static_cast<int>(Lambda.size()) != C || dnoise.rows() != C ||
      dnoise.cols() != D) {
    throw std::invalid_argument("parameter shapes inconsistent with C/D/H");
  }
  for (const auto& lam : Lambda) {
    if (lam.rows() != D || lam.cols() != H) {
      throw std::invalid_argument("loading matrix shape mismatch");
    }
    if (!lam.allFinite()) throw std::invalid_argument("non-finite loadings");
  }
  if (!pi.allFinite() || !mu.allFinite() || !dnoise.allFinite()) {
    throw std::invalid_argument("non-finite parameters");
  }
  if ((pi.array() < 0.0).any()) {
    throw std::invalid_argument("negative mixing proportion");
  }
  if (std::abs(pi.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("mixing proportions do not sum to 1");
  }
  if ((dnoise.array() <= 0.0).any()) {
    throw std::invalid_argument("noise variance at or below zero");
  }
}

ComponentCache precompute_component(const MfaParams& params, int c) {
  if (c < 0 || c >= params.C) throw std::invalid_argument("component index");
  const int H = params.H;
  const Eigen::MatrixXd& lam = params.Lambda[c];

  ComponentCache cache;
  cache.inv_dnoise = params.dnoise.row(c).transpose().cwiseInverse();
  cache.U.noalias() = cache.inv_dnoise.asDiagonal() * lam;
  cache.Lmat.noalias() = lam.transpose() * cache.U;
  cache.Lmat += Eigen::MatrixXd::Identity(H, H);
  cache.Lmat = 0.5 * (cache.Lmat + cache.Lmat.transpose()).eval();

  Eigen::LLT<Eigen::MatrixXd> llt(cache.Lmat);
  if (llt.info() != Eigen::Success) {
    cache.Lmat += 1e-10 * Eigen::MatrixXd::Identity(H, H);
    llt.compute(cache.Lmat);
    if (llt.info() != Eigen::Success) {
      throw CholeskyFailure("L_c not positive definite for component " +
                            std::to_string(c));
    }
  }
  cache.V.noalias() = llt.solve(cache.U.transpose());
  cache.Sigma_z = llt.solve(Eigen::MatrixXd::Identity(H, H));

  const double logdet_L =
      2.0 * llt.matrixLLT().diagonal().array().log().sum();
  cache.logdet_sigma =
      logdet_L + params.dnoise.row(c).array().log().sum();
  cache.log_pi = params.pi[c] > 0.0 ? std::log(params.pi[c]) : kNegInf;
  return cache;
}

std::vector<ComponentCache> precompute_all(const MfaParams& params) {
  std::vector<ComponentCache> caches(params.C);
  for (int c = 0; c < params.C; ++c) caches[c] = precompute_component(params, c);
  return caches;
}

double log_joint(const ComponentCache& cache,
                 Eigen::Ref<const Eigen::RowVectorXd> mu_c,
                 Eigen::Map<const Eigen::RowVectorXf> x, JointScratch& scratch,
                 EvalCounter& counter) {
  ++counter.joints;
  const int D = static_cast<int>(mu_c.size());
  scratch.v = x.cast<double>().transpose() - mu_c.transpose();
  const double diag_term =
      (scratch.v.array().square() * cache.inv_dnoise.array()).sum();
  scratch.a.noalias() = cache.U.transpose() * scratch.v;
  scratch.b.noalias() = cache.V * scratch.v;
  const double mahalanobis = diag_term - scratch.a.dot(scratch.b);
  return cache.log_pi -
         0.5 * (D * kLog2Pi + cache.logdet_sigma + mahalanobis);
}

namespace {

// Shared reduction: per point, log-sum-exp of log-joints over an index list
// supplied by `components(n)`. Partial sums are merged in worker order.
template <typename ComponentsOf>
double reduce_log_marginals(const MfaParams& params,
                            const std::vector<ComponentCache>& caches,
                            const Dataset& data, EvalCounter& counter,
                            int threads, ComponentsOf&& components) {
  const std::int64_t n_rows = data.size();
  const int workers = threads > 1 ? threads : 1;
  std::vector<double> partial(workers, 0.0);
  std::vector<EvalCounter> tallies(workers);

  parallel_for(n_rows, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    JointScratch scratch;
    scratch.resize(params.D, params.H);
    std::vector<double> lj;
    double sum = 0.0;
    for (std::int64_t n = begin; n < end; ++n) {
      const auto comp = components(n);
      lj.resize(comp.size());
      for (std::size_t j = 0; j < comp.size(); ++j) {
        const int c = comp[j];
        lj[j] = log_joint(caches[c], params.mu.row(c), data.row(n), scratch,
                          tallies[w]);
      }
      sum += log_sum_exp(lj);
    }
    partial[w] = sum;
  });

  double total = 0.0;
  for (int w = 0; w < workers; ++w) {
    total += partial[w];
    counter += tallies[w];
  }
  return total;
}

}  // namespace

double exact_log_likelihood(const MfaParams& params,
                            const std::vector<ComponentCache>& caches,
                            const Dataset& data, EvalCounter& counter,
                            int threads) {
  std::vector<std::int32_t> all(params.C);
  for (int c = 0; c < params.C; ++c) all[c] = c;
  return reduce_log_marginals(
      params, caches, data, counter, threads,
      [&](std::int64_t) { return std::span<const std::int32_t>(all); });
}

double truncated_free_energy(const MfaParams& params,
                             const std::vector<ComponentCache>& caches,
                             const Dataset& data, const KCollection& ksets,
                             EvalCounter& counter, int threads) {
  if (ksets.Cprime < 1 || ksets.size() != data.size()) {
    throw EmptyKSet("K collection empty or size mismatch");
  }
  return reduce_log_marginals(params, caches, data, counter, threads,
                              [&](std::int64_t n) { return ksets.row(n); });
}

}  // namespace vmfa
