#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include "vmfa/dataset.hpp"
#include "vmfa/model.hpp"

namespace vmfa {

/// Dataset container (little-endian): magic "MFAD", u32 version, u64 N,
/// u32 D, u8 dtype (0 = 32-bit float), 7 reserved bytes, then row-major
/// values. Round trips are bit-exact.
Dataset load_dataset(const std::filesystem::path& path);
void save_dataset(const Dataset& data, const std::filesystem::path& path);

/// Checkpoint container (little-endian): magic "MFAM", u32 version, u32 C,
/// u32 D, u32 H, then pi, mu, Lambda and the diagonal variances as 64-bit
/// arrays in that order.
void save_checkpoint(const MfaParams& params,
                     const std::filesystem::path& path);
MfaParams load_checkpoint(const std::filesystem::path& path);

/// Comma-separated numeric rows, no header; capped at 1e6 cells.
Dataset import_csv(const std::filesystem::path& path);

/// Trainable parameter count C*(D*(H+2)+1) - 1, computed symbolically.
std::uint64_t trainable_param_count(std::uint64_t C, std::uint64_t D,
                                    std::uint64_t H);

/// Scalars held by a checkpoint: the trainable count plus the one redundant
/// mixing-weight slot.
std::uint64_t checkpoint_scalar_count(std::uint64_t C, std::uint64_t D,
                                      std::uint64_t H);

/// Ground-truth generator for the test suites: C_true components with random
/// loadings and per-dimension noise, means spread `separation` average
/// component scales apart.
struct SyntheticSpec {
  int C_true = 1;
  int D = 1;
  int H_true = 1;
  std::int64_t N = 1;
  double separation = 3.0;
  double loading_scale = 1.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Samples the generative process (c ~ pi, z ~ N(0,I), x ~ N(Lambda_c z +
/// mu_c, D_c)) with one PRNG stream per row keyed by (seed, row). Returns
/// the dataset and the ground-truth parameters.
std::pair<Dataset, MfaParams> gen_synthetic(const SyntheticSpec& spec);

}  // namespace vmfa
