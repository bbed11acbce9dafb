#include "vmfa/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmfa/errors.hpp"
#include "vmfa/rng.hpp"

namespace vmfa {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kCheckpointVersion = 1;

// All containers are little-endian on disk; the helpers below byte-swap on
// big-endian hosts.
template <typename T>
void write_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw TruncatedFile("unexpected end of file");
  if constexpr (std::endian::native == std::endian::big) {
    std::reverse(bytes.begin(), bytes.end());
  }
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

template <typename T>
void write_array(std::ostream& out, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), count * sizeof(T));
  } else {
    for (std::size_t i = 0; i < count; ++i) write_le(out, data[i]);
  }
}

template <typename T>
void read_array(std::istream& in, T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), count * sizeof(T));
    if (!in) throw TruncatedFile("unexpected end of file");
  } else {
    for (std::size_t i = 0; i < count; ++i) data[i] = read_le<T>(in);
  }
}

void expect_magic(std::istream& in, const char* magic) {
  char buf[4];
  in.read(buf, 4);
  if (!in) throw TruncatedFile("file shorter than its magic");
  if (std::memcmp(buf, magic, 4) != 0) {
    throw BadMagic(std::string("expected magic ") + magic);
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out.write("MFAD", 4);
  write_le<std::uint32_t>(out, kDatasetVersion);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(data.size()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.dim()));
  write_le<std::uint8_t>(out, 0);  // dtype 0 = 32-bit float
  const char reserved[7] = {};
  out.write(reserved, 7);
  write_array(out, data.values().data(),
              static_cast<std::size_t>(data.size()) * data.dim());
  if (!out) throw Error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  expect_magic(in, "MFAD");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kDatasetVersion) {
    throw UnsupportedVersion("dataset version " + std::to_string(version));
  }
  const auto n = read_le<std::uint64_t>(in);
  const auto d = read_le<std::uint32_t>(in);
  const auto dtype = read_le<std::uint8_t>(in);
  if (dtype != 0) {
    throw UnsupportedVersion("dataset dtype " + std::to_string(dtype));
  }
  char reserved[7];
  in.read(reserved, 7);
  if (!in) throw TruncatedFile("dataset header truncated");
  if (n < 1 || d < 1) throw Error("dataset header declares empty data");
  Dataset::Storage rows(static_cast<std::int64_t>(n), static_cast<int>(d));
  read_array(in, rows.data(), static_cast<std::size_t>(n) * d);
  return Dataset(std::move(rows));
}

void save_checkpoint(const MfaParams& params,
                     const std::filesystem::path& path) {
  params.validate();
  std::ofstream out = open_output(path);
  out.write("MFAM", 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.C));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.D));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.H));
  write_array(out, params.pi.data(), params.C);
  write_array(out, params.mu.data(),
              static_cast<std::size_t>(params.C) * params.D);
  for (const auto& lam : params.Lambda) {
    // stored row-major, D rows of H
    for (int d = 0; d < params.D; ++d) {
      for (int h = 0; h < params.H; ++h) write_le<double>(out, lam(d, h));
    }
  }
  write_array(out, params.dnoise.data(),
              static_cast<std::size_t>(params.C) * params.D);
  if (!out) throw Error("write failed for " + path.string());
}

MfaParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  expect_magic(in, "MFAM");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw UnsupportedVersion("checkpoint version " + std::to_string(version));
  }
  MfaParams params;
  params.C = static_cast<int>(read_le<std::uint32_t>(in));
  params.D = static_cast<int>(read_le<std::uint32_t>(in));
  params.H = static_cast<int>(read_le<std::uint32_t>(in));
  if (params.C < 1 || params.D < 1 || params.H < 1 || params.H > params.D) {
    throw Error("checkpoint header declares invalid sizes");
  }
  params.pi.resize(params.C);
  params.mu.resize(params.C, params.D);
  params.Lambda.assign(params.C, Eigen::MatrixXd(params.D, params.H));
  params.dnoise.resize(params.C, params.D);
  read_array(in, params.pi.data(), params.C);
  read_array(in, params.mu.data(),
             static_cast<std::size_t>(params.C) * params.D);
  for (auto& lam : params.Lambda) {
    for (int d = 0; d < params.D; ++d) {
      for (int h = 0; h < params.H; ++h) lam(d, h) = read_le<double>(in);
    }
  }
  read_array(in, params.dnoise.data(),
             static_cast<std::size_t>(params.C) * params.D);
  return params;
}

Dataset import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::vector<float>> rows;
  std::string line;
  std::size_t cells = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<float> row;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      std::size_t consumed = 0;
      const float value = std::stof(field, &consumed);
      row.push_back(value);
      ++cells;
    }
    if (cells > 1000000) {
      throw Error("CSV import capped at 1e6 cells");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error("CSV rows have inconsistent widths");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error("CSV file has no rows");
  Dataset::Storage values(static_cast<std::int64_t>(rows.size()),
                          static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      values(static_cast<std::int64_t>(i), static_cast<int>(j)) = rows[i][j];
    }
  }
  return Dataset(std::move(values));
}

std::uint64_t trainable_param_count(std::uint64_t C, std::uint64_t D,
                                    std::uint64_t H) {
  return C * (D * (H + 2) + 1) - 1;
}

std::uint64_t checkpoint_scalar_count(std::uint64_t C, std::uint64_t D,
                                      std::uint64_t H) {
  return trainable_param_count(C, D, H) + 1;
}

std::pair<Dataset, MfaParams> gen_synthetic(const SyntheticSpec& spec) {
  if (spec.C_true < 1 || spec.D < 1 || spec.H_true < 1 ||
      spec.H_true > spec.D || spec.N < 1 || spec.separation < 0.0 ||
      spec.loading_scale < 0.0 || spec.noise_scale < 0.0) {
    throw std::invalid_argument("invalid synthetic spec");
  }
  const int C = spec.C_true, D = spec.D, H = spec.H_true;

  MfaParams truth;
  truth.C = C;
  truth.D = D;
  truth.H = H;
  truth.pi.resize(C);
  truth.mu = RowMatrixXd(C, D);
  truth.Lambda.assign(C, Eigen::MatrixXd(D, H));
  truth.dnoise = RowMatrixXd(C, D);

  Rng rng(hash_combine(spec.seed, 0x9e0de1ULL));
  for (int c = 0; c < C; ++c) truth.pi[c] = rng.uniform(0.5, 1.5);
  truth.pi /= truth.pi.sum();

  // Average per-dimension component scale, used to place the means. The
  // sampler uses the raw noise variances (which may be exactly zero); the
  // returned truth parameters carry them floored so they stay valid.
  const double scale = std::sqrt(spec.noise_scale * spec.noise_scale +
                                 H * spec.loading_scale * spec.loading_scale);
  RowMatrixXd sample_noise(C, D);
  for (int c = 0; c < C; ++c) {
    for (int d = 0; d < D; ++d) {
      truth.mu(c, d) = spec.separation * scale * rng.gaussian();
      sample_noise(c, d) =
          spec.noise_scale * spec.noise_scale * rng.uniform(0.5, 1.5);
      truth.dnoise(c, d) = std::max(sample_noise(c, d), 1e-12);
    }
    for (int d = 0; d < D; ++d) {
      for (int h = 0; h < H; ++h) {
        truth.Lambda[c](d, h) = spec.loading_scale * rng.gaussian();
      }
    }
  }
  truth.validate();

  Dataset::Storage rows(spec.N, D);
  std::vector<double> cum_pi(C);
  double acc = 0.0;
  for (int c = 0; c < C; ++c) {
    acc += truth.pi[c];
    cum_pi[c] = acc;
  }
  Eigen::VectorXd z(H), x(D);
  for (std::int64_t n = 0; n < spec.N; ++n) {
    Rng row_rng(hash3(spec.seed, 0x5a3e11eULL, static_cast<std::uint64_t>(n)));
    const double u = row_rng.uniform();
    int c = 0;
    while (c + 1 < C && u >= cum_pi[c]) ++c;
    for (int h = 0; h < H; ++h) z[h] = row_rng.gaussian();
    x = truth.mu.row(c).transpose();
    x.noalias() += truth.Lambda[c] * z;
    for (int d = 0; d < D; ++d) {
      x[d] += std::sqrt(sample_noise(c, d)) * row_rng.gaussian();
    }
    rows.row(n) = x.cast<float>().transpose();
  }
  return {Dataset(std::move(rows)), std::move(truth)};
}

}  // namespace vmfa
