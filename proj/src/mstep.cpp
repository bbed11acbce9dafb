#include "vmfa/mstep.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vmfa/errors.hpp"
#include "vmfa/numerics.hpp"
#include "vmfa/parallel.hpp"

namespace vmfa {

void SuffStats::init(int C, int D, int H) {
  Nc = Eigen::VectorXd::Zero(C);
  Y.assign(C, Eigen::MatrixXd::Zero(D, H + 1));
  E.assign(C, Eigen::MatrixXd::Zero(H + 1, H + 1));
  sq_sum = RowMatrixXd::Zero(C, D);
}

SuffStats& SuffStats::operator+=(const SuffStats& o) {
  Nc += o.Nc;
  for (std::size_t c = 0; c < Y.size(); ++c) {
    Y[c] += o.Y[c];
    E[c] += o.E[c];
  }
  sq_sum += o.sq_sum;
  return *this;
}

namespace {

// Workspace for one (n, c) contribution.
struct AccumScratch {
  Eigen::VectorXd xd;  // D
  Eigen::VectorXd v;   // D, x - mu_c
  Eigen::VectorXd mz;  // H, posterior latent mean

  void resize(int D, int H) {
    xd.resize(D);
    v.resize(D);
    mz.resize(H);
  }
};

// E[zhat] = [mz; 1], E[zhat zhat^T] = [[Sigma_z + mz mz^T, mz], [mz^T, 1]].
inline void accumulate_point(const MfaParams& params,
                             const std::vector<ComponentCache>& caches,
                             std::int32_t c, double q, AccumScratch& ws,
                             SuffStats& stats) {
  const int H = params.H;
  ws.v = ws.xd - params.mu.row(c).transpose();
  ws.mz.noalias() = caches[c].V * ws.v;

  stats.Nc[c] += q;
  auto& E = stats.E[c];
  E.topLeftCorner(H, H).noalias() += q * caches[c].Sigma_z;
  E.topLeftCorner(H, H).noalias() += (q * ws.mz) * ws.mz.transpose();
  E.col(H).head(H) += q * ws.mz;
  E.row(H).head(H) += q * ws.mz.transpose();
  E(H, H) += q;

  auto& Y = stats.Y[c];
  Y.leftCols(H).noalias() += (q * ws.xd) * ws.mz.transpose();
  Y.col(H) += q * ws.xd;
  stats.sq_sum.row(c) += q * ws.xd.array().square().matrix().transpose();
}

}  // namespace

SuffStats accumulate_suffstats(const MfaParams& params,
                               const std::vector<ComponentCache>& caches,
                               const Dataset& data, const KCollection& ksets,
                               const std::vector<double>& resp,
                               int threads) {
  const std::int64_t n_points = data.size();
  if (ksets.size() != n_points ||
      resp.size() != static_cast<std::size_t>(n_points) * ksets.Cprime) {
    throw std::invalid_argument("responsibilities shape mismatch");
  }
  const int workers = threads > 1 ? threads : 1;
  std::vector<SuffStats> parts(workers);
  for (auto& p : parts) p.init(params.C, params.D, params.H);

  parallel_for(n_points, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    AccumScratch ws;
    ws.resize(params.D, params.H);
    for (std::int64_t n = begin; n < end; ++n) {
      ws.xd = data.row(n).cast<double>().transpose();
      const auto krow = ksets.row(n);
      const double* q = resp.data() + n * ksets.Cprime;
      for (int j = 0; j < ksets.Cprime; ++j) {
        accumulate_point(params, caches, krow[j], q[j], ws, parts[w]);
      }
    }
  });

  SuffStats total = std::move(parts[0]);
  for (int w = 1; w < workers; ++w) total += parts[w];
  return total;
}

MfaParams update_params(const SuffStats& stats, std::int64_t n_points,
                        const MfaParams& previous,
                        const Eigen::VectorXd& floor) {
  if (n_points <= 0) throw std::invalid_argument("N must be positive");
  const int C = previous.C, D = previous.D, H = previous.H;
  MfaParams next;
  next.C = C;
  next.D = D;
  next.H = H;
  next.pi = Eigen::VectorXd::Zero(C);
  next.mu = RowMatrixXd(C, D);
  next.Lambda.assign(C, Eigen::MatrixXd(D, H));
  next.dnoise = RowMatrixXd(C, D);

  for (int c = 0; c < C; ++c) {
    const double nc = stats.Nc[c];
    if (nc == 0.0) {
      // Empty component: freeze and drop it from the mixture.
      next.pi[c] = 0.0;
      next.mu.row(c) = previous.mu.row(c);
      next.Lambda[c] = previous.Lambda[c];
      next.dnoise.row(c) = previous.dnoise.row(c);
      continue;
    }
    next.pi[c] = nc / static_cast<double>(n_points);

    Eigen::MatrixXd Ec = stats.E[c];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Ec);
    Eigen::MatrixXd At = ldlt.solve(stats.Y[c].transpose());  // (H+1) x D
    if (ldlt.info() != Eigen::Success || !At.allFinite()) {
      Ec += (1e-10 * Ec.trace() / (H + 1)) *
            Eigen::MatrixXd::Identity(H + 1, H + 1);
      ldlt.compute(Ec);
      At = ldlt.solve(stats.Y[c].transpose());
      if (ldlt.info() != Eigen::Success || !At.allFinite()) {
        throw SingularEc("E_c singular for component " + std::to_string(c));
      }
    }
    next.Lambda[c] = At.topRows(H).transpose();
    next.mu.row(c) = At.row(H);

    // sigma^2_{c,d} = (sq_sum_d - sum_h (Y_c . A_c)_{d,h}) / N_c, with the
    // updated A_c; clamped at the floor (also absorbs tiny negative
    // cancellation residue).
    const Eigen::ArrayXd fitted =
        (stats.Y[c].array() * At.transpose().array()).rowwise().sum();
    next.dnoise.row(c) =
        ((stats.sq_sum.row(c).transpose().array() - fitted) / nc)
            .max(floor.array())
            .matrix()
            .transpose();
  }

  const double live_mass = next.pi.sum();
  if (live_mass <= 0.0) {
    throw SingularEc("all components empty after update");
  }
  next.pi /= live_mass;
  return next;
}

double em_full_step(const MfaParams& params,
                    const std::vector<ComponentCache>& caches,
                    const Dataset& data, SuffStats& stats,
                    EvalCounter& counter, int threads) {
  const std::int64_t n_points = data.size();
  const int C = params.C;
  const int workers = threads > 1 ? threads : 1;
  std::vector<SuffStats> parts(workers);
  for (auto& p : parts) p.init(params.C, params.D, params.H);
  std::vector<double> partial_ll(workers, 0.0);
  std::vector<EvalCounter> tallies(workers);

  parallel_for(n_points, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    JointScratch scratch;
    scratch.resize(params.D, params.H);
    AccumScratch ws;
    ws.resize(params.D, params.H);
    std::vector<double> lj(C);
    double ll = 0.0;
    for (std::int64_t n = begin; n < end; ++n) {
      for (int c = 0; c < C; ++c) {
        lj[c] = log_joint(caches[c], params.mu.row(c), data.row(n), scratch,
                          tallies[w]);
      }
      const double lse = log_sum_exp(lj);
      ll += lse;
      ws.xd = data.row(n).cast<double>().transpose();
      for (int c = 0; c < C; ++c) {
        accumulate_point(params, caches, c, std::exp(lj[c] - lse), ws,
                         parts[w]);
      }
    }
    partial_ll[w] = ll;
  });

  stats = std::move(parts[0]);
  double ll = partial_ll[0];
  counter += tallies[0];
  for (int w = 1; w < workers; ++w) {
    stats += parts[w];
    ll += partial_ll[w];
    counter += tallies[w];
  }
  return ll;
}

}  // namespace vmfa
