#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "vmfa/estep.hpp"
#include "vmfa/model.hpp"
#include "vmfa/mstep.hpp"
#include "vmfa/seeding.hpp"

namespace vmfa {

enum class Algo { vmfa, emmfa, emmfa_matched };

struct TrainConfig {
  Algo algo = Algo::vmfa;
  int C = 1;
  int H = 1;
  int Cprime = 1;
  int G = 1;
  double epsilon = 1e-4;  ///< relative free-energy convergence threshold
  int max_iters = 500;
  DistanceMode distance_mode = DistanceMode::kl;
  bool deterministic = true;
  std::uint64_t seed = 0;
  int eval_nll_every = 0;  ///< exact-NLL stride in iterations; 0 = final only
  int threads = 1;
  bool literal_eq14 = false;  ///< signed convergence ratio, paper-literal
  bool halt_on_max_iters = true;  ///< throw MaxIterExceeded at the cap
  InitConfig init;

  void validate() const;
};

struct IterationRecord {
  int t = 0;
  bool warmup = false;
  double F = 0.0;                  ///< free energy / log-likelihood
  std::uint64_t joint_evals = 0;   ///< cumulative training joints
  std::uint64_t distance_evals = 0;
  double wall_ms = 0.0;
  int empty_components = 0;
  double nll_train = std::numeric_limits<double>::quiet_NaN();
  double nll_test = std::numeric_limits<double>::quiet_NaN();
};

struct TrainReport {
  std::string algo;
  std::vector<IterationRecord> iterations;
  int warmup_iterations = 0;
  int main_iterations = 0;
  bool converged = false;
  std::uint64_t joint_evals = 0;
  std::uint64_t distance_evals = 0;
  double total_wall_ms = 0.0;
  int empty_components = 0;
  int threads = 1;
  double nll_train = std::numeric_limits<double>::quiet_NaN();
  double nll_test = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  MfaParams params;
  VarState state;
  TrainReport report;
};

/// Relative free-energy convergence test. The default uses the magnitude
/// |F_curr - F_prev| / |F_prev| < epsilon; literal mode applies
/// (F_curr - F_prev) / F_prev < epsilon exactly as written, which on the
/// usual negative free energies fires on any improvement.
inline bool check_convergence(double f_prev, double f_curr, double epsilon,
                              bool literal = false) {
  if (literal) return (f_curr - f_prev) / f_prev < epsilon;
  return std::abs(f_curr - f_prev) < epsilon * std::abs(f_prev);
}

/// Full truncated variational training: seeding, parameter and state init,
/// warm-up E-steps at fixed parameters, then alternating variational E- and
/// M-steps until the free energy (recomputed after each M-step) converges.
TrainResult train_vmfa(const TrainConfig& config, const Dataset& data,
                       const Dataset* testset = nullptr);

/// Conventional full-EM baseline: exact posteriors over all C components
/// (exactly N*C counted joints per iteration) and the same M-step formulas.
std::pair<MfaParams, TrainReport> train_emmfa(const TrainConfig& config,
                                              const Dataset& data,
                                              const Dataset* testset = nullptr);

/// Quality-matched baseline: full EM, monitoring the test NLL each
/// iteration; on the first iteration whose NLL falls below `target_nll`,
/// returns the previous iteration's parameter snapshot. Throws
/// TargetUnreachable if max_iters is hit first.
std::pair<MfaParams, TrainReport> train_emmfa_matched(const TrainConfig& config,
                                                      const Dataset& data,
                                                      const Dataset& testset,
                                                      double target_nll);

/// Negative log-likelihood per data point under the exact mixture.
double nll_per_point(const MfaParams& params,
                     const std::vector<ComponentCache>& caches,
                     const Dataset& data, int threads = 1);

}  // namespace vmfa
