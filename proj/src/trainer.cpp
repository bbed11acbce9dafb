#include "vmfa/trainer.hpp"

#include <chrono>
#include <stdexcept>
#include <utility>

#include "vmfa/errors.hpp"

namespace vmfa {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int count_empty(const MfaParams& params) {
  return static_cast<int>((params.pi.array() == 0.0).count());
}

struct InitOutcome {
  std::vector<std::int64_t> seeds;
  MfaParams params;
  std::vector<ComponentCache> caches;
  Eigen::VectorXd floor;
};

// Shared by all three trainers so runs with the same seed start from
// identical parameters.
InitOutcome initialize(const TrainConfig& config, const Dataset& data,
                       EvalCounter& counter) {
  InitOutcome out;
  out.floor = variance_floor(data);
  Rng rng(hash_combine(config.seed, 0x1217f01dULL));
  if (config.init.method == InitConfig::Method::afkmc2) {
    out.seeds =
        afkmc2_seed(data, config.C, config.init.chain_length, rng, counter);
  } else {
    out.seeds = random_points_seed(data, config.C, rng);
  }
  out.params = init_params(data, config.C, config.H, out.seeds, rng,
                           config.init.lambda_scale, out.floor);
  out.caches = precompute_all(out.params);
  return out;
}

void finalize_nll(const MfaParams& params, const Dataset& data,
                  const Dataset* testset, int threads, TrainReport& report) {
  const auto caches = precompute_all(params);
  report.nll_train = nll_per_point(params, caches, data, threads);
  if (testset != nullptr) {
    report.nll_test = nll_per_point(params, caches, *testset, threads);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (C < 1 || H < 1) throw std::invalid_argument("C and H must be >= 1");
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (Cprime < 1 || Cprime > C) {
    throw std::invalid_argument("need 1 <= C' <= C");
  }
  if (algo == Algo::vmfa && (G < 1 || G > C)) {
    throw std::invalid_argument("need 1 <= G <= C");
  }
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (init.chain_length < 1) {
    throw std::invalid_argument("chain length must be >= 1");
  }
  if (init.warmup_epsilon <= 0.0) {
    throw std::invalid_argument("warm-up epsilon must be > 0");
  }
}

double nll_per_point(const MfaParams& params,
                     const std::vector<ComponentCache>& caches,
                     const Dataset& data, int threads) {
  EvalCounter scratch;
  return -exact_log_likelihood(params, caches, data, scratch, threads) /
         static_cast<double>(data.size());
}

TrainResult train_vmfa(const TrainConfig& config, const Dataset& data,
                       const Dataset* testset) {
  config.validate();
  if (data.dim() < config.H) {
    throw std::invalid_argument("H exceeds data dimensionality");
  }
  const auto t0 = Clock::now();
  EvalCounter counter;   // training cost: E-step joints + seeding distances
  EvalCounter scratch;   // reporting-only evaluations, never counted
  double excluded_ms = 0.0;  // NLL evaluation time, kept out of runtimes

  TrainResult result;
  TrainReport& report = result.report;
  report.algo = "vmfa";
  report.threads = config.threads;

  InitOutcome init = initialize(config, data, counter);
  result.params = std::move(init.params);
  std::vector<ComponentCache> caches = std::move(init.caches);

  Rng state_rng(hash_combine(config.seed, 0x7a57a7e5ULL));
  result.state = init_varstate(data.size(), config.C, config.Cprime, config.G,
                               init.seeds, state_rng);

  std::uint64_t estep_index = 0;

  // Warm-up: repeated E-steps at fixed parameters. The free energy of each
  // step comes from its retained joints, so warm-up costs no extra joints.
  {
    double prev = std::numeric_limits<double>::quiet_NaN();
    for (int it = 0; it < config.init.warmup_max_iters; ++it) {
      const auto it_t0 = Clock::now();
      const EStepResult step = variational_e_step(
          result.params, caches, data, result.state, config.seed,
          estep_index++, config.distance_mode, counter, config.threads);
      ++report.warmup_iterations;
      IterationRecord rec;
      rec.t = report.warmup_iterations;
      rec.warmup = true;
      rec.F = step.free_energy;
      rec.joint_evals = counter.joints;
      rec.distance_evals = counter.distances;
      rec.wall_ms = ms_since(it_t0);
      rec.empty_components = count_empty(result.params);
      report.iterations.push_back(rec);
      if (std::isfinite(prev) && check_convergence(prev, step.free_energy,
                                                   config.init.warmup_epsilon,
                                                   config.literal_eq14)) {
        break;
      }
      prev = step.free_energy;
      if (it + 1 == config.init.warmup_max_iters) {
        throw MaxIterExceeded("warm-up did not converge");
      }
    }
  }

  // Main loop: variational E-step, M-step, then the stopping-rule free
  // energy recomputed under the new parameters (reporting cost only).
  double prev_f = std::numeric_limits<double>::quiet_NaN();
  for (int t = 1; t <= config.max_iters; ++t) {
    const auto it_t0 = Clock::now();
    const EStepResult step = variational_e_step(
        result.params, caches, data, result.state, config.seed, estep_index++,
        config.distance_mode, counter, config.threads);
    const SuffStats stats =
        accumulate_suffstats(result.params, caches, data, result.state.K,
                             step.resp, config.threads);
    result.params = update_params(stats, data.size(), result.params,
                                  init.floor);
    caches = precompute_all(result.params);
    const double f = truncated_free_energy(result.params, caches, data,
                                           result.state.K, scratch,
                                           config.threads);
    ++report.main_iterations;
    IterationRecord rec;
    rec.t = t;
    rec.F = f;
    rec.joint_evals = counter.joints;
    rec.distance_evals = counter.distances;
    rec.wall_ms = ms_since(it_t0);
    rec.empty_components = count_empty(result.params);
    if (config.eval_nll_every > 0 && t % config.eval_nll_every == 0) {
      const auto nll_t0 = Clock::now();
      rec.nll_train = nll_per_point(result.params, caches, data,
                                    config.threads);
      if (testset != nullptr) {
        rec.nll_test = nll_per_point(result.params, caches, *testset,
                                     config.threads);
      }
      excluded_ms += ms_since(nll_t0);
    }
    report.iterations.push_back(rec);
    if (std::isfinite(prev_f) &&
        check_convergence(prev_f, f, config.epsilon, config.literal_eq14)) {
      report.converged = true;
      break;
    }
    prev_f = f;
  }
  if (!report.converged && config.halt_on_max_iters) {
    throw MaxIterExceeded("training did not converge within " +
                          std::to_string(config.max_iters) + " iterations");
  }

  report.joint_evals = counter.joints;
  report.distance_evals = counter.distances;
  report.empty_components = count_empty(result.params);
  report.total_wall_ms = ms_since(t0) - excluded_ms;
  finalize_nll(result.params, data, testset, config.threads, report);
  return result;
}

namespace {

// Shared full-EM loop. `on_iteration` sees the post-M-step parameters and
// may stop the loop by returning true.
template <typename OnIteration>
std::pair<MfaParams, TrainReport> run_emmfa_loop(const TrainConfig& config,
                                                 const Dataset& data,
                                                 bool use_eq14,
                                                 OnIteration&& on_iteration) {
  config.validate();
  const auto t0 = Clock::now();
  EvalCounter counter;
  EvalCounter scratch;
  double excluded_ms = 0.0;

  TrainReport report;
  report.algo = "emmfa";
  report.threads = config.threads;

  InitOutcome init = initialize(config, data, counter);
  MfaParams params = std::move(init.params);
  std::vector<ComponentCache> caches = std::move(init.caches);

  double prev_f = std::numeric_limits<double>::quiet_NaN();
  bool stopped = false;
  for (int t = 1; t <= config.max_iters && !stopped; ++t) {
    const auto it_t0 = Clock::now();
    SuffStats stats;
    em_full_step(params, caches, data, stats, counter, config.threads);
    MfaParams previous = std::move(params);
    params = update_params(stats, data.size(), previous, init.floor);
    caches = precompute_all(params);
    const double f =
        exact_log_likelihood(params, caches, data, scratch, config.threads);
    ++report.main_iterations;
    IterationRecord rec;
    rec.t = t;
    rec.F = f;
    rec.joint_evals = counter.joints;
    rec.distance_evals = counter.distances;
    rec.wall_ms = ms_since(it_t0);
    rec.empty_components = count_empty(params);
    if (config.eval_nll_every > 0 && t % config.eval_nll_every == 0) {
      const auto nll_t0 = Clock::now();
      rec.nll_train = nll_per_point(params, caches, data, config.threads);
      excluded_ms += ms_since(nll_t0);
    }
    report.iterations.push_back(rec);
    const auto cb_t0 = Clock::now();  // NLL monitoring happens in here
    const bool stop_now = on_iteration(t, params, previous, caches, report);
    excluded_ms += ms_since(cb_t0);
    if (stop_now) {
      stopped = true;
      break;
    }
    if (use_eq14 && std::isfinite(prev_f) &&
        check_convergence(prev_f, f, config.epsilon, config.literal_eq14)) {
      report.converged = true;
      break;
    }
    prev_f = f;
  }
  if (!stopped && !report.converged) {
    if (use_eq14 && config.halt_on_max_iters) {
      throw MaxIterExceeded("full EM did not converge within " +
                            std::to_string(config.max_iters) + " iterations");
    }
    if (!use_eq14) {
      throw TargetUnreachable("target NLL not reached within " +
                              std::to_string(config.max_iters) +
                              " iterations");
    }
  }
  report.joint_evals = counter.joints;
  report.distance_evals = counter.distances;
  report.empty_components = count_empty(params);
  report.total_wall_ms = ms_since(t0) - excluded_ms;
  return {std::move(params), std::move(report)};
}

}  // namespace

std::pair<MfaParams, TrainReport> train_emmfa(const TrainConfig& config,
                                              const Dataset& data,
                                              const Dataset* testset) {
  auto [params, report] = run_emmfa_loop(
      config, data, /*use_eq14=*/true,
      [](int, const MfaParams&, const MfaParams&,
         const std::vector<ComponentCache>&, TrainReport&) { return false; });
  finalize_nll(params, data, testset, config.threads, report);
  return {std::move(params), std::move(report)};
}

std::pair<MfaParams, TrainReport> train_emmfa_matched(const TrainConfig& config,
                                                      const Dataset& data,
                                                      const Dataset& testset,
                                                      double target_nll) {
  MfaParams snapshot;
  bool have_snapshot = false;
  auto [params, report] = run_emmfa_loop(
      config, data, /*use_eq14=*/false,
      [&](int, const MfaParams& current, const MfaParams& previous,
          const std::vector<ComponentCache>& caches, TrainReport& rep) {
        const double nll =
            nll_per_point(current, caches, testset, config.threads);
        rep.iterations.back().nll_test = nll;
        if (nll < target_nll) {
          snapshot = previous;
          have_snapshot = true;
          return true;
        }
        return false;
      });
  if (!have_snapshot) {
    throw TargetUnreachable("matched run ended without surpassing target");
  }
  report.algo = "emmfa-matched";
  finalize_nll(snapshot, data, &testset, config.threads, report);
  return {std::move(snapshot), std::move(report)};
}

}  // namespace vmfa
