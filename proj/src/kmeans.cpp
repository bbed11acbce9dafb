#include "vmfa/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "vmfa/mstep.hpp"
#include "vmfa/numerics.hpp"
#include "vmfa/parallel.hpp"
#include "vmfa/rng.hpp"
#include "vmfa/trainer.hpp"

namespace vmfa {

namespace {

// One assignment pass; returns inertia and fills per-point best distances.
double assign_points(const Dataset& data, const RowMatrixXd& centers,
                     std::vector<std::int32_t>& assignments,
                     std::vector<double>& best_d2, EvalCounter& counter,
                     int threads) {
  const std::int64_t n_points = data.size();
  const int C = static_cast<int>(centers.rows());
  const int workers = threads > 1 ? threads : 1;
  std::vector<double> partial(workers, 0.0);
  std::vector<EvalCounter> tallies(workers);

  parallel_for(n_points, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    Eigen::VectorXd xd(data.dim());
    double sum = 0.0;
    for (std::int64_t n = begin; n < end; ++n) {
      xd = data.row(n).cast<double>().transpose();
      double best = std::numeric_limits<double>::infinity();
      std::int32_t best_c = 0;
      for (int c = 0; c < C; ++c) {
        ++tallies[w].distances;
        const double d2 = (xd - centers.row(c).transpose()).squaredNorm();
        if (d2 < best) {
          best = d2;
          best_c = static_cast<std::int32_t>(c);
        }
      }
      assignments[n] = best_c;
      best_d2[n] = best;
      sum += best;
    }
    partial[w] = sum;
  });

  double inertia = 0.0;
  for (int w = 0; w < workers; ++w) {
    inertia += partial[w];
    counter += tallies[w];
  }
  return inertia;
}

}  // namespace

KmeansState kmeans_lloyd(const Dataset& data, int C,
                         const RowMatrixXd& init_centers, int max_iters,
                         double tol, EvalCounter& counter, int threads) {
  const std::int64_t n_points = data.size();
  const int D = data.dim();
  if (C < 1 || C > n_points) throw std::invalid_argument("C out of range");
  if (init_centers.rows() != C || init_centers.cols() != D) {
    throw std::invalid_argument("init centers shape mismatch");
  }

  KmeansState state;
  state.centers = init_centers;
  state.assignments.assign(n_points, 0);
  std::vector<double> best_d2(n_points, 0.0);

  for (int it = 0; it < max_iters; ++it) {
    state.inertia = assign_points(data, state.centers, state.assignments,
                                  best_d2, counter, threads);
    ++state.iterations;

    RowMatrixXd sums = RowMatrixXd::Zero(C, D);
    std::vector<std::int64_t> counts(C, 0);
    for (std::int64_t n = 0; n < n_points; ++n) {
      sums.row(state.assignments[n]) += data.row(n).cast<double>();
      ++counts[state.assignments[n]];
    }
    RowMatrixXd next = state.centers;
    for (int c = 0; c < C; ++c) {
      if (counts[c] > 0) {
        next.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      }
    }
    // Empty clusters steal the point farthest from its assigned center.
    std::vector<std::uint8_t> stolen(n_points, 0);
    for (int c = 0; c < C; ++c) {
      if (counts[c] > 0) continue;
      double far = -1.0;
      std::int64_t far_n = -1;
      for (std::int64_t n = 0; n < n_points; ++n) {
        if (!stolen[n] && best_d2[n] > far) {
          far = best_d2[n];
          far_n = n;
        }
      }
      stolen[far_n] = 1;
      next.row(c) = data.row(far_n).cast<double>();
    }

    double movement = 0.0;
    for (int c = 0; c < C; ++c) {
      movement =
          std::max(movement, (next.row(c) - state.centers.row(c)).norm());
    }
    state.centers = std::move(next);
    if (movement < tol) break;
  }
  // Final pass so assignments are nearest-center w.r.t. the final centers.
  state.inertia = assign_points(data, state.centers, state.assignments,
                                best_d2, counter, threads);
  return state;
}

MfaParams fit_fa_per_cluster(const Dataset& data, const KmeansState& state,
                             int H, std::uint64_t seed,
                             const Eigen::VectorXd& floor,
                             EvalCounter& counter, double epsilon,
                             int max_fa_iters, int threads) {
  const int C = static_cast<int>(state.centers.rows());
  const int D = data.dim();
  const std::int64_t n_points = data.size();

  std::vector<std::vector<std::int32_t>> cells(C);
  for (std::int64_t n = 0; n < n_points; ++n) {
    cells[state.assignments[n]].push_back(static_cast<std::int32_t>(n));
  }

  MfaParams mixture;
  mixture.C = C;
  mixture.D = D;
  mixture.H = H;
  mixture.pi.resize(C);
  mixture.mu = RowMatrixXd(C, D);
  mixture.Lambda.assign(C, Eigen::MatrixXd::Zero(D, H));
  mixture.dnoise = RowMatrixXd(C, D);

  std::vector<EvalCounter> tallies(C);
  parallel_for(C, threads, [&](int, std::int64_t begin, std::int64_t end) {
    for (std::int64_t c = begin; c < end; ++c) {
      const auto& cell = cells[c];
      mixture.pi[c] =
          static_cast<double>(cell.size()) / static_cast<double>(n_points);

      if (cell.size() < 2) {
        // Too small for a variance estimate: mean (or the center), floored
        // noise, zero loadings.
        if (cell.empty()) {
          mixture.mu.row(c) = state.centers.row(c);
        } else {
          mixture.mu.row(c) = data.row(cell[0]).cast<double>();
        }
        mixture.dnoise.row(c) = floor.transpose();
        continue;
      }

      Dataset::Storage cell_rows(cell.size(), D);
      for (std::size_t i = 0; i < cell.size(); ++i) {
        cell_rows.row(static_cast<std::int64_t>(i)) = data.row(cell[i]);
      }
      const Dataset cell_data(std::move(cell_rows));

      // Single-component FA via the shared EM machinery, q == 1.
      MfaParams fa;
      fa.C = 1;
      fa.D = D;
      fa.H = H;
      fa.pi = Eigen::VectorXd::Ones(1);
      fa.mu = RowMatrixXd(1, D);
      Eigen::VectorXd cell_mean = Eigen::VectorXd::Zero(D);
      for (std::int64_t i = 0; i < cell_data.size(); ++i) {
        cell_mean += cell_data.row(i).cast<double>().transpose();
      }
      fa.mu.row(0) = cell_mean.transpose() / static_cast<double>(cell.size());
      fa.dnoise = per_dimension_variance(cell_data)
                      .array()
                      .max(floor.array())
                      .matrix()
                      .transpose();
      fa.Lambda.assign(1, Eigen::MatrixXd(D, H));
      Rng rng(hash3(seed, 0xfa0001ULL, static_cast<std::uint64_t>(c)));
      for (int d = 0; d < D; ++d) {
        for (int h = 0; h < H; ++h) fa.Lambda[0](d, h) = rng.uniform();
      }

      KCollection ksets;
      ksets.Cprime = 1;
      ksets.idx.assign(cell_data.size(), 0);
      const std::vector<double> resp(cell_data.size(), 1.0);

      double prev = std::numeric_limits<double>::quiet_NaN();
      auto caches = precompute_all(fa);
      for (int it = 0; it < max_fa_iters; ++it) {
        const SuffStats stats =
            accumulate_suffstats(fa, caches, cell_data, ksets, resp, 1);
        fa = update_params(stats, cell_data.size(), fa, floor);
        caches = precompute_all(fa);
        const double f = truncated_free_energy(fa, caches, cell_data, ksets,
                                               tallies[c], 1);
        if (std::isfinite(prev) && check_convergence(prev, f, epsilon)) break;
        prev = f;
      }
      mixture.mu.row(c) = fa.mu.row(0);
      mixture.Lambda[c] = fa.Lambda[0];
      mixture.dnoise.row(c) = fa.dnoise.row(0);
    }
  });
  for (const auto& tally : tallies) counter += tally;

  // pi sums to 1 up to rounding of the cell-size ratios; tighten it.
  mixture.pi /= mixture.pi.sum();
  mixture.validate();
  return mixture;
}

}  // namespace vmfa
