#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "wpmec/model.hpp"

namespace wpmec {

// One parametric solve at fixed eta.
struct InnerResult {
  double Upsilon = 0.0;
  Allocation alloc;
  // min_k R_k / E_k of alloc; the next Dinkelbach parameter.
  double ratio = std::numeric_limits<double>::quiet_NaN();
  int iterations = 1;          // inner loop count (SCA or alternation rounds)
  std::vector<double> trace;   // inner objective per inner iteration
};

struct ParametricProblem {
  Regime regime = Regime::TdmaPartial;
  std::function<InnerResult(double eta)> solve_inner;
  // Optional: feasibility residuals of the returned allocation.
  std::function<std::vector<Residual>(const Allocation&)> residuals;
  double eta0 = 0.0;
};

struct SolveReport {
  double eta_star = 0.0;
  Allocation alloc;
  std::vector<double> eta_trace;
  std::vector<std::vector<double>> inner_traces;
  std::vector<Residual> residuals;
  int iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  std::string status = "ok";
};

// Dinkelbach loop: eta <- ratio(inner(eta)) until ratio - eta <= tol_outer * max(1, eta).
// Inner failures after the first iteration return the best iterate flagged non-converged.
SolveReport dinkelbach(const ParametricProblem& problem, const SystemParams& sys);

// Single inner solve at eta = 0 (computation-bits maximization).
SolveReport max_min_bits(const ParametricProblem& problem, const SystemParams& sys);

}  // namespace wpmec
