#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "vmfa/model.hpp"

namespace vmfa {

enum class DistanceMode { kl, euclid };

/// Variational state of one training run: per-point truncated sets K^(n),
/// per-component neighborhood sets g_c (always containing c), and the hard
/// partition I_c with labels c_n produced by the last E-step.
struct VarState {
  int C = 0;
  int Cprime = 0;
  int G = 0;
  KCollection K;                                   ///< N x Cprime indices
  std::vector<std::vector<std::int32_t>> g;        ///< C sorted lists, <= G
  std::vector<std::vector<std::int32_t>> partition;  ///< I_c, ascending n
  std::vector<std::int32_t> labels;                ///< c_n per point

  /// Throws std::invalid_argument on any structural invariant violation
  /// (sizes, distinctness, c in g_c, partition disjoint cover).
  void validate(std::int64_t n_points) const;
};

/// Sparse per-component accumulators for the sampled divergence estimate:
/// c -> { ctilde -> (running sum, sample count) }. Keys with ctilde == c are
/// never stored.
struct DistanceAccumulator {
  struct Entry {
    double sum = 0.0;
    std::int64_t count = 0;
  };
  std::vector<std::unordered_map<std::int32_t, Entry>> by_component;

  void reset(int C) {
    by_component.assign(C, {});
  }
};

/// Log-joints evaluated in block 1, kept for reuse by blocks 2-4. Fixed
/// per-point stride keeps the layout contiguous.
struct RetainedJoints {
  int stride = 0;
  std::vector<std::int32_t> count;  ///< per point, |S^(n)|
  std::vector<std::int32_t> idx;    ///< N * stride component indices
  std::vector<double> lj;           ///< N * stride log-joints

  void reset(std::int64_t n_points, int stride_in) {
    stride = stride_in;
    count.assign(n_points, 0);
    idx.assign(n_points * stride_in, -1);
    lj.assign(n_points * stride_in, 0.0);
  }

  std::span<const std::int32_t> indices(std::int64_t n) const {
    return {idx.data() + n * stride, static_cast<std::size_t>(count[n])};
  }
  std::span<const double> joints(std::int64_t n) const {
    return {lj.data() + n * stride, static_cast<std::size_t>(count[n])};
  }

  /// Log-joint of component c at point n; requires c in S^(n).
  double lookup(std::int64_t n, std::int32_t c) const;
};

struct EStepResult {
  RetainedJoints retained;
  std::vector<double> resp;  ///< N x Cprime, aligned with VarState::K rows
  DistanceAccumulator distances;
  double free_energy = 0.0;      ///< Eq.-style truncated bound at current params
  std::uint64_t joints = 0;      ///< joint evaluations performed (block 1)
};

/// Search space for point n: deduplicated union of g_c over c in K^(n) plus
/// the extra component index, in insertion order. |result| <= Cprime*G + 1.
std::vector<std::int32_t> build_search_space(const VarState& state,
                                             std::int64_t n,
                                             std::int32_t extra);

/// The Cprime candidates with largest log-joints, ties to the smaller index;
/// result sorted ascending. Throws InsufficientCandidates if fewer than
/// Cprime candidates are given.
std::vector<std::int32_t> update_k(std::span<const std::int32_t> candidates,
                                   std::span<const double> log_joints,
                                   int cprime);

/// Hard partition: c_n = argmax over K^(n) of the retained log-joints, ties
/// to the smaller index. Rebuilds labels and partition (cells ascending in n).
void hard_partition(const KCollection& ksets, const RetainedJoints& retained,
                    std::vector<std::int32_t>& labels,
                    std::vector<std::vector<std::int32_t>>& partition);

/// Block-3 accumulation over retained joints only; performs no new joint
/// evaluations. kl mode sums conditional log-density ratios
/// (log p(x|c) - log p(x|ctilde)); euclid mode sums -log p(ctilde, x).
/// Components with pi == 0 are skipped as candidates.
void accumulate_distances(DistanceAccumulator& acc,
                          const std::vector<std::vector<std::int32_t>>& partition,
                          const RetainedJoints& retained, DistanceMode mode,
                          const MfaParams& params);

/// g_c = {c} plus the G-1 candidates with smallest average accumulated
/// distance; unstored candidates count as +inf; ties to the smaller index.
/// Result sorted ascending.
std::vector<std::int32_t> update_g(const DistanceAccumulator& acc, int c,
                                   int G);

/// Truncated responsibilities over one K row given its log-joints, via
/// log-sum-exp; sums to 1.
void responsibilities_row(std::span<const double> log_joints,
                          std::span<double> out);

/// One full variational E-step (blocks 1-4) at fixed parameters. Updates
/// K-sets, labels, partition and g-sets in `state`; returns retained joints,
/// responsibilities aligned with K rows, the distance accumulator and the
/// truncated free energy. The extra random component per point is keyed by
/// (seed, iteration, n). counter.joints grows by sum_n |S^(n)|
/// <= N*(Cprime*G + 1).
EStepResult variational_e_step(const MfaParams& params,
                               const std::vector<ComponentCache>& caches,
                               const Dataset& data, VarState& state,
                               std::uint64_t seed, std::uint64_t iteration,
                               DistanceMode mode, EvalCounter& counter,
                               int threads = 1);

}  // namespace vmfa
