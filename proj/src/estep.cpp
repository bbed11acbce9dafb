#include "vmfa/estep.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vmfa/errors.hpp"
#include "vmfa/numerics.hpp"
#include "vmfa/parallel.hpp"
#include "vmfa/rng.hpp"

namespace vmfa {

void VarState::validate(std::int64_t n_points) const {
  if (C < 1 || Cprime < 1 || Cprime > C || G < 1 || G > C) {
    throw std::invalid_argument("invalid VarState sizes");
  }
  if (K.Cprime != Cprime || K.size() != n_points) {
    throw std::invalid_argument("K collection shape mismatch");
  }
  std::vector<std::int32_t> sorted;
  for (std::int64_t n = 0; n < n_points; ++n) {
    const auto row = K.row(n);
    sorted.assign(row.begin(), row.end());
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= C ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("K row not distinct in-range indices");
    }
  }
  if (static_cast<int>(g.size()) != C) {
    throw std::invalid_argument("g collection shape mismatch");
  }
  for (int c = 0; c < C; ++c) {
    if (g[c].empty() || static_cast<int>(g[c].size()) > G) {
      throw std::invalid_argument("g_c size out of range");
    }
    sorted = g[c];
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() < 0 || sorted.back() >= C ||
        std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("g_c not distinct in-range indices");
    }
    if (!std::binary_search(sorted.begin(), sorted.end(), c)) {
      throw std::invalid_argument("g_c does not contain c");
    }
  }
  if (!partition.empty()) {
    if (static_cast<int>(partition.size()) != C) {
      throw std::invalid_argument("partition shape mismatch");
    }
    std::vector<std::uint8_t> seen(n_points, 0);
    std::int64_t covered = 0;
    for (const auto& cell : partition) {
      for (std::int32_t n : cell) {
        if (n < 0 || n >= n_points || seen[n]) {
          throw std::invalid_argument("partition cells not disjoint");
        }
        seen[n] = 1;
        ++covered;
      }
    }
    if (covered != n_points) {
      throw std::invalid_argument("partition does not cover all points");
    }
  }
}

double RetainedJoints::lookup(std::int64_t n, std::int32_t c) const {
  const auto ids = indices(n);
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] == c) return joints(n)[j];
  }
  throw std::invalid_argument("component " + std::to_string(c) +
                              " not retained for point " + std::to_string(n));
}

namespace {

// Dedup helper shared by the public wrapper and the parallel block 1:
// appends unseen indices using an epoch-stamped mark array.
void build_search_space_into(const VarState& state, std::int64_t n,
                             std::int32_t extra,
                             std::vector<std::int32_t>& out,
                             std::vector<std::uint32_t>& stamp,
                             std::uint32_t epoch) {
  out.clear();
  auto push = [&](std::int32_t c) {
    if (stamp[c] != epoch) {
      stamp[c] = epoch;
      out.push_back(c);
    }
  };
  for (std::int32_t c : state.K.row(n)) {
    for (std::int32_t member : state.g[c]) push(member);
    // K^(n) must stay inside its own search space even if g_c lost c's
    // neighbors; g_c always contains c, so this holds by construction.
  }
  push(extra);
}

void update_k_into(std::span<const std::int32_t> candidates,
                   std::span<const double> log_joints, int cprime,
                   std::vector<std::int32_t>& order,
                   std::span<std::int32_t> out) {
  const std::size_t m = candidates.size();
  if (static_cast<int>(m) < cprime) {
    throw InsufficientCandidates("search space smaller than C'");
  }
  order.resize(m);
  for (std::size_t j = 0; j < m; ++j) order[j] = static_cast<std::int32_t>(j);
  std::nth_element(order.begin(), order.begin() + (cprime - 1), order.end(),
                   [&](std::int32_t a, std::int32_t b) {
                     if (log_joints[a] != log_joints[b]) {
                       return log_joints[a] > log_joints[b];
                     }
                     return candidates[a] < candidates[b];
                   });
  for (int j = 0; j < cprime; ++j) out[j] = candidates[order[j]];
  std::sort(out.begin(), out.end());
}

}  // namespace

std::vector<std::int32_t> build_search_space(const VarState& state,
                                             std::int64_t n,
                                             std::int32_t extra) {
  std::vector<std::int32_t> out;
  std::vector<std::uint32_t> stamp(state.C, 0);
  build_search_space_into(state, n, extra, out, stamp, 1);
  return out;
}

std::vector<std::int32_t> update_k(std::span<const std::int32_t> candidates,
                                   std::span<const double> log_joints,
                                   int cprime) {
  std::vector<std::int32_t> out(cprime);
  std::vector<std::int32_t> order;
  update_k_into(candidates, log_joints, cprime, order, out);
  return out;
}

void hard_partition(const KCollection& ksets, const RetainedJoints& retained,
                    std::vector<std::int32_t>& labels,
                    std::vector<std::vector<std::int32_t>>& partition) {
  const std::int64_t n_points = ksets.size();
  labels.resize(n_points);
  for (std::int64_t n = 0; n < n_points; ++n) {
    const auto ids = retained.indices(n);
    const auto ljs = retained.joints(n);
    std::int32_t best = -1;
    double best_lj = kNegInf;
    // K rows are sorted ascending, so scanning the retained entries in
    // order with a strict > keeps ties on the smaller component index.
    const auto krow = ksets.row(n);
    for (std::int32_t c : krow) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j] != c) continue;
        if (best < 0 || ljs[j] > best_lj) {
          best = c;
          best_lj = ljs[j];
        }
        break;
      }
    }
    labels[n] = best;
  }
  for (auto& cell : partition) cell.clear();
  for (std::int64_t n = 0; n < n_points; ++n) {
    partition[labels[n]].push_back(static_cast<std::int32_t>(n));
  }
}

void accumulate_distances(DistanceAccumulator& acc,
                          const std::vector<std::vector<std::int32_t>>& partition,
                          const RetainedJoints& retained, DistanceMode mode,
                          const MfaParams& params) {
  const int C = static_cast<int>(partition.size());
  for (int c = 0; c < C; ++c) {
    auto& row = acc.by_component[c];
    const double log_pi_c = params.pi[c] > 0.0 ? std::log(params.pi[c]) : kNegInf;
    for (std::int32_t n : partition[c]) {
      const auto ids = retained.indices(n);
      const auto ljs = retained.joints(n);
      const double cond_c = retained.lookup(n, c) - log_pi_c;
      for (std::size_t j = 0; j < ids.size(); ++j) {
        const std::int32_t ct = ids[j];
        if (ct == c || params.pi[ct] <= 0.0) continue;
        double value;
        if (mode == DistanceMode::kl) {
          value = cond_c - (ljs[j] - std::log(params.pi[ct]));
        } else {
          value = -ljs[j];
        }
        auto& entry = row[ct];
        entry.sum += value;
        entry.count += 1;
      }
    }
  }
}

std::vector<std::int32_t> update_g(const DistanceAccumulator& acc, int c,
                                   int G) {
  const auto& row = acc.by_component[c];
  std::vector<std::pair<double, std::int32_t>> ranked;
  ranked.reserve(row.size());
  for (const auto& [ct, entry] : row) {
    ranked.emplace_back(entry.sum / static_cast<double>(entry.count), ct);
  }
  std::sort(ranked.begin(), ranked.end());
  std::vector<std::int32_t> out;
  out.reserve(G);
  out.push_back(static_cast<std::int32_t>(c));
  const int take = std::min<int>(G - 1, static_cast<int>(ranked.size()));
  for (int j = 0; j < take; ++j) out.push_back(ranked[j].second);
  std::sort(out.begin(), out.end());
  return out;
}

void responsibilities_row(std::span<const double> log_joints,
                          std::span<double> out) {
  const double lse = log_sum_exp(log_joints);
  for (std::size_t j = 0; j < log_joints.size(); ++j) {
    out[j] = std::exp(log_joints[j] - lse);
  }
}

EStepResult variational_e_step(const MfaParams& params,
                               const std::vector<ComponentCache>& caches,
                               const Dataset& data, VarState& state,
                               std::uint64_t seed, std::uint64_t iteration,
                               DistanceMode mode, EvalCounter& counter,
                               int threads) {
  const std::int64_t n_points = data.size();
  const int C = state.C;
  const int stride = static_cast<int>(std::min<std::int64_t>(
      static_cast<std::int64_t>(state.Cprime) * state.G + 1, C));

  EStepResult res;
  res.retained.reset(n_points, stride);
  res.resp.assign(n_points * state.Cprime, 0.0);

  const int workers = threads > 1 ? threads : 1;
  std::vector<EvalCounter> tallies(workers);
  std::vector<double> partial_f(workers, 0.0);

  // Block 1: build S^(n), evaluate its joints, keep them, update K^(n).
  parallel_for(n_points, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    JointScratch scratch;
    scratch.resize(params.D, params.H);
    std::vector<std::uint32_t> stamp(C, 0);
    std::uint32_t epoch = 0;
    std::vector<std::int32_t> space;
    std::vector<std::int32_t> order;
    space.reserve(stride);
    for (std::int64_t n = begin; n < end; ++n) {
      const std::int32_t extra = static_cast<std::int32_t>(
          uniform_component(seed, iteration, static_cast<std::uint64_t>(n), C));
      build_search_space_into(state, n, extra, space, stamp, ++epoch);
      const int m = static_cast<int>(space.size());
      res.retained.count[n] = m;
      std::int32_t* ids = res.retained.idx.data() + n * stride;
      double* ljs = res.retained.lj.data() + n * stride;
      for (int j = 0; j < m; ++j) {
        const std::int32_t c = space[j];
        ids[j] = c;
        ljs[j] = log_joint(caches[c], params.mu.row(c), data.row(n), scratch,
                           tallies[w]);
      }
      update_k_into({ids, static_cast<std::size_t>(m)},
                    {ljs, static_cast<std::size_t>(m)}, state.Cprime, order,
                    state.K.row(n));
    }
  });
  for (int w = 0; w < workers; ++w) {
    res.joints += tallies[w].joints;
    counter += tallies[w];
  }

  // Block 2: hard partition.
  if (static_cast<int>(state.partition.size()) != C) state.partition.assign(C, {});
  hard_partition(state.K, res.retained, state.labels, state.partition);

  // Block 3: distance estimates from retained joints only, then g updates.
  // Each component is owned by exactly one worker.
  res.distances.reset(C);
  parallel_for(C, threads, [&](int, std::int64_t begin, std::int64_t end) {
    for (std::int64_t c = begin; c < end; ++c) {
      auto& row = res.distances.by_component[c];
      const double log_pi_c =
          params.pi[c] > 0.0 ? std::log(params.pi[c]) : kNegInf;
      for (std::int32_t n : state.partition[c]) {
        const auto ids = res.retained.indices(n);
        const auto ljs = res.retained.joints(n);
        const double cond_c =
            res.retained.lookup(n, static_cast<std::int32_t>(c)) - log_pi_c;
        for (std::size_t j = 0; j < ids.size(); ++j) {
          const std::int32_t ct = ids[j];
          if (ct == c || params.pi[ct] <= 0.0) continue;
          const double value = mode == DistanceMode::kl
                                   ? cond_c - (ljs[j] - std::log(params.pi[ct]))
                                   : -ljs[j];
          auto& entry = row[ct];
          entry.sum += value;
          entry.count += 1;
        }
      }
      state.g[c] = update_g(res.distances, static_cast<int>(c), state.G);
    }
  });

  // Block 4: truncated responsibilities and the free energy, both from the
  // joints retained in block 1.
  parallel_for(n_points, threads, [&](int w, std::int64_t begin, std::int64_t end) {
    std::vector<double> krow_lj(state.Cprime);
    double f = 0.0;
    for (std::int64_t n = begin; n < end; ++n) {
      const auto krow = state.K.row(n);
      for (int j = 0; j < state.Cprime; ++j) {
        krow_lj[j] = res.retained.lookup(n, krow[j]);
      }
      const double lse = log_sum_exp(krow_lj);
      f += lse;
      double* q = res.resp.data() + n * state.Cprime;
      for (int j = 0; j < state.Cprime; ++j) {
        q[j] = std::exp(krow_lj[j] - lse);
      }
    }
    partial_f[w] = f;
  });
  res.free_energy = 0.0;
  for (int w = 0; w < workers; ++w) res.free_energy += partial_f[w];
  return res;
}

}  // namespace vmfa
