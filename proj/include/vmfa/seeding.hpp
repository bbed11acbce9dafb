#pragma once

#include <cstdint>
#include <vector>

#include "vmfa/dataset.hpp"
#include "vmfa/estep.hpp"
#include "vmfa/model.hpp"
#include "vmfa/rng.hpp"

namespace vmfa {

struct InitConfig {
  enum class Method { afkmc2, random_points };

  Method method = Method::afkmc2;
  int chain_length = 10;       ///< Markov chain steps per seed
  double warmup_epsilon = 1e-4;
  int warmup_max_iters = 1000;
  double lambda_scale = 1.0;   ///< multiplies the uniform [0,1) loading init
};

/// AFK-MC^2 seeding: first center uniform, then one m-step Metropolis chain
/// per further center with proposal q(x) = d^2(x, c1) / (2 sum d^2) + 1/(2N)
/// and acceptance min(1, d^2(y) q(x) / (d^2(x) q(y))), where d^2 is the
/// squared Euclidean distance to the nearest already-chosen center. Every
/// distance evaluation increments counter.distances. Returns C distinct row
/// indices; throws DegenerateData if the data has fewer than C distinct rows.
std::vector<std::int64_t> afkmc2_seed(const Dataset& data, int C,
                                      int chain_length, Rng& rng,
                                      EvalCounter& counter);

/// Uniform draw of C distinct row indices (large-C fallback).
std::vector<std::int64_t> random_points_seed(const Dataset& data, int C,
                                             Rng& rng);

/// Initial parameters: mu_c from the seed rows, every component's variances
/// set to the global per-dimension data variance (floored), loadings uniform
/// in [0, lambda_scale), pi uniform 1/C.
MfaParams init_params(const Dataset& data, int C, int H,
                      const std::vector<std::int64_t>& seeds, Rng& rng,
                      double lambda_scale, const Eigen::VectorXd& floor);

/// Initial variational state: each seed point's K set contains its component,
/// remaining K and g slots filled uniformly without duplicates.
VarState init_varstate(std::int64_t n_points, int C, int Cprime, int G,
                       const std::vector<std::int64_t>& seed_rows, Rng& rng);

struct WarmupResult {
  int iterations = 0;
  std::vector<double> free_energy;  ///< one value per warm-up E-step
};

/// Repeated variational E-steps at fixed parameters until the relative
/// free-energy criterion fires. Never modifies the parameters. `iteration`
/// is the global E-step counter used to key the per-point random draws; it
/// is advanced by the number of steps performed. Throws MaxIterExceeded at
/// the cap.
WarmupResult warmup(const MfaParams& params,
                    const std::vector<ComponentCache>& caches,
                    const Dataset& data, VarState& state, std::uint64_t seed,
                    std::uint64_t& iteration, double epsilon, int max_iters,
                    DistanceMode mode, bool literal_eq14, EvalCounter& counter,
                    int threads = 1);

}  // namespace vmfa
