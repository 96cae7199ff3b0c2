#pragma once

#include <stdexcept>
#include <string>

namespace overlap_tomo {

/// Base of all errors raised on mathematically invalid input.
///
/// The CLI maps every DomainError to exit code 3; plain
/// std::invalid_argument is reserved for malformed values (exit code 2).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Eigenvalue gap below the closed-form threshold.
class DegenerateSpectrum : public DomainError {
 public:
  using DomainError::DomainError;
};

class InvalidParameter : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Measured support limits outside the region reachable by any spectrum.
class UnphysicalLimits : public DomainError {
 public:
  using DomainError::DomainError;
};

class InsufficientSamples : public DomainError {
 public:
  using DomainError::DomainError;
};

/// (1 - 3 lambda)^2 vanishes in a permutation-curve minimum.
class DegenerateDenominator : public DomainError {
 public:
  using DomainError::DomainError;
};

class RangeMismatch : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace overlap_tomo
