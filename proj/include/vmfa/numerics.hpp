#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace vmfa {

inline constexpr double kLog2Pi = 1.8378770664093453;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(sum_i exp(v_i)) with max-shift; -inf entries are handled, and an
/// all--inf input yields -inf.
inline double log_sum_exp(std::span<const double> v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace vmfa
