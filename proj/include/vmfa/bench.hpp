#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmfa/dataset.hpp"
#include "vmfa/trainer.hpp"

namespace vmfa {

/// One suite measurement; shared by the scaling and quality suites.
struct SuiteRow {
  int C = 0;
  std::string algo;
  int cprime = 0;
  int gsize = 0;
  double joints_per_point = 0.0;
  int iterations = 0;
  double wall_ms = 0.0;
  double nll_train = 0.0;
  double nll_test = 0.0;
  double rel_nll = 0.0;
};

/// Ordinary least squares on (log x, log y); the slope of f(x) = b x^a.
double fit_power_law_exponent(std::span<const double> x,
                              std::span<const double> y);

struct ScalingSuiteSpec {
  std::vector<int> C_list;  ///< ascending component ladder
  std::int64_t N_total = 0;
  int repeats = 5;
  int H = 3;
  int Cprime = 3;
  int G = 15;
  double epsilon = 1e-4;
  std::uint64_t seed = 0;
  bool run_matched = false;  ///< also run the quality-matched stopping rule
  int max_iters = 500;
  int threads = 1;
  int parallel_jobs = 1;
};

struct ScalingResult {
  std::vector<SuiteRow> rows;
  double exponent_vmfa = 0.0;
  double exponent_emmfa = 0.0;
  double exponent_matched = 0.0;
  bool timing_contaminated = false;  ///< set when jobs ran concurrently
};

/// Component ladder with N~ = N_total * C / C_max subsampling; runs the
/// truncated and full-EM trainers (and optionally the matched variant) per
/// (C, repeat) cell from identical initialization, records joints per data
/// point until convergence and fits the power-law exponents.
ScalingResult run_scaling_suite(const ScalingSuiteSpec& spec,
                                const Dataset& data, const Dataset* testset);

struct QualitySuiteSpec {
  int C = 0;
  int H = 5;
  std::vector<int> cprimes{3, 5, 7};
  std::vector<int> gsizes{5, 15, 30};
  double epsilon = 1e-4;
  std::uint64_t seed = 0;
  bool include_kmeansfa = true;
  int max_iters = 500;
  int threads = 1;
  int parallel_jobs = 1;
};

struct QualityResult {
  std::vector<SuiteRow> rows;
  bool timing_contaminated = false;
};

/// Fixed C: full EM once, the truncated trainer over the (C', G) grid, and
/// optionally k-means+FA, all initialized identically (means shared); emits
/// test NLL relative to the full-EM baseline.
QualityResult run_quality_suite(const QualitySuiteSpec& spec,
                                const Dataset& train, const Dataset& test);

/// CSV with the fixed header
/// C,algo,cprime,gsize,joints_per_point,iterations,wall_ms,nll_train,nll_test,rel_nll
void write_suite_csv(std::ostream& out, std::span<const SuiteRow> rows);

}  // namespace vmfa
