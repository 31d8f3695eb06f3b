#pragma once

#include <stdexcept>
#include <string>

namespace wpmec {

enum class ErrorKind {
  InvalidInput,
  UnsortedGains,
  Infeasible,
  NoStrictlyFeasibleStart,
  LineSearchStall,
  MaxNewtonIters,
  NonConvergent,
  InnerSolverFailure,
  SubproblemFailure,
  DegenerateDuals,
  DegenerateCoefficients,
  PositiveZ,
  NegativeZ,
  GapNotClosed,
  NoFeasiblePoint,
  AllZero,
  NanGuard,
  ConfigError,
};

const char* to_string(ErrorKind kind);

class SolverError : public std::runtime_error {
 public:
  SolverError(ErrorKind kind, const std::string& what, double certificate = 0.0)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind),
        certificate_(certificate) {}

  ErrorKind kind() const { return kind_; }
  // Infeasible: smallest achievable max constraint violation (scaled units).
  double certificate() const { return certificate_; }

 private:
  ErrorKind kind_;
  double certificate_;
};

}  // namespace wpmec
