#include "vmfa/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "vmfa/errors.hpp"
#include "vmfa/trainer.hpp"

namespace vmfa {

namespace {

std::int64_t count_distinct_rows(const Dataset& data, std::int64_t needed) {
  const std::int64_t n = data.size();
  std::vector<std::int64_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return std::lexicographical_compare(
        data.row(a).data(), data.row(a).data() + data.dim(),
        data.row(b).data(), data.row(b).data() + data.dim());
  });
  std::int64_t distinct = 1;
  for (std::int64_t i = 1; i < n && distinct < needed; ++i) {
    if ((data.row(order[i]).array() != data.row(order[i - 1]).array()).any()) {
      ++distinct;
    }
  }
  return distinct;
}

double squared_distance(const Dataset& data, std::int64_t a, std::int64_t b,
                        EvalCounter& counter) {
  ++counter.distances;
  return (data.row(a).cast<double>() - data.row(b).cast<double>())
      .squaredNorm();
}

double distance_to_centers(const Dataset& data, std::int64_t n,
                           const std::vector<std::int64_t>& centers,
                           EvalCounter& counter) {
  double best = std::numeric_limits<double>::infinity();
  for (std::int64_t c : centers) {
    best = std::min(best, squared_distance(data, n, c, counter));
  }
  return best;
}

std::int64_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min<std::int64_t>(it - cdf.begin(),
                                static_cast<std::int64_t>(cdf.size()) - 1);
}

}  // namespace

std::vector<std::int64_t> afkmc2_seed(const Dataset& data, int C,
                                      int chain_length, Rng& rng,
                                      EvalCounter& counter) {
  const std::int64_t n = data.size();
  if (C < 1 || C > n) throw std::invalid_argument("C out of range");
  if (chain_length < 1) throw std::invalid_argument("chain_length < 1");
  if (count_distinct_rows(data, C) < C) {
    throw DegenerateData("fewer distinct rows than requested seeds");
  }

  std::vector<std::int64_t> centers;
  centers.reserve(C);
  centers.push_back(rng.uniform_int(n));

  // Proposal from the first center only: q(x) = d^2/(2 sum d^2) + 1/(2N).
  std::vector<double> q(n);
  double sum_d2 = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    q[i] = squared_distance(data, i, centers[0], counter);
    sum_d2 += q[i];
  }
  const double uniform_part = 0.5 / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    q[i] = (sum_d2 > 0.0 ? 0.5 * q[i] / sum_d2 : 0.0) + uniform_part;
  }
  std::vector<double> cdf(n);
  std::partial_sum(q.begin(), q.end(), cdf.begin());

  while (static_cast<int>(centers.size()) < C) {
    std::int64_t x = draw_from_cdf(cdf, rng);
    double dx = distance_to_centers(data, x, centers, counter);
    for (int step = 1; step < chain_length; ++step) {
      const std::int64_t y = draw_from_cdf(cdf, rng);
      const double dy = distance_to_centers(data, y, centers, counter);
      if (dy <= 0.0) continue;  // duplicates of chosen centers never accepted
      bool accept = dx <= 0.0;
      if (!accept) {
        accept = rng.uniform() < (dy * q[x]) / (dx * q[y]);
      }
      if (accept) {
        x = y;
        dx = dy;
      }
    }
    if (dx <= 0.0) {
      // Every proposal duplicated a chosen center; fall back to the point
      // farthest from its nearest center.
      double best = -1.0;
      std::int64_t best_i = -1;
      for (std::int64_t i = 0; i < n; ++i) {
        const double d = distance_to_centers(data, i, centers, counter);
        if (d > best) {
          best = d;
          best_i = i;
        }
      }
      x = best_i;
    }
    centers.push_back(x);
  }
  return centers;
}

std::vector<std::int64_t> random_points_seed(const Dataset& data, int C,
                                             Rng& rng) {
  const std::int64_t n = data.size();
  if (C < 1 || C > n) throw std::invalid_argument("C out of range");
  if (count_distinct_rows(data, C) < C) {
    throw DegenerateData("fewer distinct rows than requested seeds");
  }
  // Draw without replacement; rows already chosen (or equal to a chosen row)
  // are rejected.
  std::vector<std::int64_t> centers;
  centers.reserve(C);
  std::vector<std::uint8_t> used(n, 0);
  while (static_cast<int>(centers.size()) < C) {
    const std::int64_t i = rng.uniform_int(n);
    if (used[i]) continue;
    bool duplicate = false;
    for (std::int64_t c : centers) {
      if ((data.row(i).array() == data.row(c).array()).all()) {
        duplicate = true;
        break;
      }
    }
    used[i] = 1;
    if (!duplicate) centers.push_back(i);
  }
  return centers;
}

MfaParams init_params(const Dataset& data, int C, int H,
                      const std::vector<std::int64_t>& seeds, Rng& rng,
                      double lambda_scale, const Eigen::VectorXd& floor) {
  if (static_cast<int>(seeds.size()) != C) {
    throw std::invalid_argument("seed count != C");
  }
  const int D = data.dim();
  MfaParams params;
  params.C = C;
  params.D = D;
  params.H = H;
  params.pi = Eigen::VectorXd::Constant(C, 1.0 / C);
  params.mu = RowMatrixXd(C, D);
  params.Lambda.assign(C, Eigen::MatrixXd(D, H));
  params.dnoise = RowMatrixXd(C, D);

  const Eigen::VectorXd var = per_dimension_variance(data);
  const Eigen::RowVectorXd shared_noise =
      var.array().max(floor.array()).matrix().transpose();
  for (int c = 0; c < C; ++c) {
    params.mu.row(c) = data.row(seeds[c]).cast<double>();
    params.dnoise.row(c) = shared_noise;
    for (int d = 0; d < D; ++d) {
      for (int h = 0; h < H; ++h) {
        params.Lambda[c](d, h) = rng.uniform() * lambda_scale;
      }
    }
  }
  params.validate();
  return params;
}

namespace {

// Fills `out` with `want` distinct indices from [0, C); `preset` (if >= 0)
// is always included. Partial Fisher-Yates over a caller-provided buffer.
void fill_distinct(int C, int want, std::int32_t preset, Rng& rng,
                   std::vector<std::int32_t>& buffer,
                   std::span<std::int32_t> out) {
  buffer.resize(C);
  for (int i = 0; i < C; ++i) buffer[i] = i;
  int start = 0;
  if (preset >= 0) {
    std::swap(buffer[0], buffer[preset]);
    start = 1;
  }
  for (int i = start; i < want; ++i) {
    const int j = i + static_cast<int>(rng.uniform_int(C - i));
    std::swap(buffer[i], buffer[j]);
  }
  std::copy(buffer.begin(), buffer.begin() + want, out.begin());
  std::sort(out.begin(), out.end());
}

}  // namespace

VarState init_varstate(std::int64_t n_points, int C, int Cprime, int G,
                       const std::vector<std::int64_t>& seed_rows, Rng& rng) {
  if (Cprime < 1 || Cprime > C || G < 1 || G > C) {
    throw std::invalid_argument("invalid Cprime/G");
  }
  VarState state;
  state.C = C;
  state.Cprime = Cprime;
  state.G = G;
  state.K.Cprime = Cprime;
  state.K.idx.assign(n_points * Cprime, -1);
  state.g.assign(C, {});

  std::vector<std::int32_t> seed_component(n_points, -1);
  for (int c = 0; c < static_cast<int>(seed_rows.size()); ++c) {
    seed_component[seed_rows[c]] = c;
  }
  std::vector<std::int32_t> buffer;
  for (std::int64_t n = 0; n < n_points; ++n) {
    fill_distinct(C, Cprime, seed_component[n], rng, buffer, state.K.row(n));
  }
  for (int c = 0; c < C; ++c) {
    state.g[c].resize(G);
    fill_distinct(C, G, c, rng, buffer, state.g[c]);
  }
  return state;
}

WarmupResult warmup(const MfaParams& params,
                    const std::vector<ComponentCache>& caches,
                    const Dataset& data, VarState& state, std::uint64_t seed,
                    std::uint64_t& iteration, double epsilon, int max_iters,
                    DistanceMode mode, bool literal_eq14, EvalCounter& counter,
                    int threads) {
  WarmupResult result;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < max_iters; ++it) {
    const EStepResult step = variational_e_step(
        params, caches, data, state, seed, iteration++, mode, counter, threads);
    result.free_energy.push_back(step.free_energy);
    ++result.iterations;
    if (std::isfinite(prev) &&
        check_convergence(prev, step.free_energy, epsilon, literal_eq14)) {
      return result;
    }
    prev = step.free_energy;
  }
  throw MaxIterExceeded("warm-up did not converge within " +
                        std::to_string(max_iters) + " iterations");
}

}  // namespace vmfa
