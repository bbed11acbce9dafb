#pragma once

#include <stdexcept>
#include <string>

namespace vmfa {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// L_c = I + Lambda^T D^-1 Lambda is not positive definite, even after one
/// jitter retry. Signals degenerate loadings or noise variances.
struct CholeskyFailure : Error {
  using Error::Error;
};

/// A truncated index set K^(n) is empty.
struct EmptyKSet : Error {
  using Error::Error;
};

/// Fewer candidates than C' were offered to a K-set update.
struct InsufficientCandidates : Error {
  using Error::Error;
};

/// The latent-moment matrix E_c is numerically singular after regularization.
struct SingularEc : Error {
  using Error::Error;
};

/// An iteration cap was reached before convergence.
struct MaxIterExceeded : Error {
  using Error::Error;
};

/// A quality-matched run hit its iteration cap before reaching the target NLL.
struct TargetUnreachable : Error {
  using Error::Error;
};

/// The dataset has fewer distinct rows than requested seeds.
struct DegenerateData : Error {
  using Error::Error;
};

/// File does not start with the expected magic bytes.
struct BadMagic : Error {
  using Error::Error;
};

/// File ends before the payload declared in its header.
struct TruncatedFile : Error {
  using Error::Error;
};

/// File declares a container version this build cannot read.
struct UnsupportedVersion : Error {
  using Error::Error;
};

}  // namespace vmfa
