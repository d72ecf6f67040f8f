#pragma once

#include <stdexcept>
#include <string>

namespace mirror_em {

// Parameter vector lies outside the open natural or mean domain of a family.
// The message names the violated predicate so callers can report it verbatim.
class DomainError : public std::runtime_error {
 public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A computation produced a non-finite or otherwise unusable value (overflowed
// log-sum-exp, empty support, zero total posterior mass, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// A matrix factorization needed by a solver step failed (non-SPD Fisher,
// singular pencil).
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

// Operation is not defined for the model at hand (e.g. asking the Laplace
// mixture for its complete-data exponential family).
class UnsupportedError : public std::logic_error {
 public:
  explicit UnsupportedError(const std::string& what) : std::logic_error(what) {}
};

// Problem size exceeds an intentional hard cap (exhaustive enumeration).
class TooLargeError : public std::invalid_argument {
 public:
  explicit TooLargeError(const std::string& what) : std::invalid_argument(what) {}
};

// A mixture component received (numerically) zero posterior mass, so its
// weighted statistics cannot be renormalized.
class ZeroWeightComponentError : public std::runtime_error {
 public:
  explicit ZeroWeightComponentError(const std::string& what) : std::runtime_error(what) {}
};

// Prior pseudo-statistics are not strictly inside the mean domain.
class ImproperPriorError : public std::invalid_argument {
 public:
  explicit ImproperPriorError(const std::string& what) : std::invalid_argument(what) {}
};

// An inexact inner solve could not certify its required surrogate gap.
class CertificateError : public std::runtime_error {
 public:
  explicit CertificateError(const std::string& what) : std::runtime_error(what) {}
};

// Every step size in a grid search diverged or left the domain.
class AllDivergedError : public std::runtime_error {
 public:
  explicit AllDivergedError(const std::string& what) : std::runtime_error(what) {}
};

// A trajectory tail is too short for the requested rate diagnostic.
class InsufficientTailError : public std::runtime_error {
 public:
  explicit InsufficientTailError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed configuration, dataset, or command line input.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace mirror_em
