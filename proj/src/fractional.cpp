#include "wpmec/fractional.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wpmec {

namespace {

void finish(SolveReport& r, const ParametricProblem& p) {
  if (p.residuals) r.residuals = p.residuals(r.alloc);
}

}  // namespace

SolveReport dinkelbach(const ParametricProblem& problem, const SystemParams& sys) {
  if (!problem.solve_inner) throw SolverError(ErrorKind::InvalidInput, "no inner solver");
  if (!(problem.eta0 >= 0)) throw SolverError(ErrorKind::InvalidInput, "eta0 must be >= 0");

  SolveReport rep;
  double eta = problem.eta0;
  bool have = false;
  for (int n = 0; n < sys.max_iters; ++n) {
    InnerResult in;
    try {
      in = problem.solve_inner(eta);
    } catch (const SolverError& e) {
      if (!have) {
        // Infeasibility is a property of the instance, not of this iteration.
        if (e.kind() == ErrorKind::Infeasible) throw;
        throw SolverError(ErrorKind::InnerSolverFailure,
                          "iteration " + std::to_string(n) + ": " + e.what());
      }
      rep.status = std::string("inner failure at iteration ") + std::to_string(n);
      finish(rep, problem);
      return rep;
    }
    rep.eta_trace.push_back(eta);
    rep.inner_traces.push_back(in.trace);
    rep.inner_iterations += in.iterations;
    rep.iterations = n + 1;
    if (!std::isfinite(in.ratio) || !std::isfinite(in.Upsilon))
      throw SolverError(ErrorKind::NanGuard, "inner solve returned a non-finite value");

    if (!have || in.ratio > rep.eta_star) {
      rep.eta_star = in.ratio;
      rep.alloc = in.alloc;
      have = true;
    }
    if (in.ratio - eta <= sys.tol_outer * std::max(1.0, eta)) {
      rep.converged = true;
      break;
    }
    eta = in.ratio;
  }
  if (!rep.converged) rep.status = "max iterations";
  finish(rep, problem);
  return rep;
}

SolveReport max_min_bits(const ParametricProblem& problem, const SystemParams&) {
  if (!problem.solve_inner) throw SolverError(ErrorKind::InvalidInput, "no inner solver");
  SolveReport rep;
  InnerResult in = problem.solve_inner(0.0);
  rep.eta_star = std::isfinite(in.ratio) ? in.ratio : 0.0;
  rep.alloc = in.alloc;
  rep.eta_trace = {0.0};
  rep.inner_traces.push_back(in.trace);
  rep.iterations = 1;
  rep.inner_iterations = in.iterations;
  rep.converged = true;
  finish(rep, problem);
  return rep;
}

}  // namespace wpmec
