#pragma once

#include <string>

#include "wpmec/fractional.hpp"

namespace wpmec {

// CE: max-min computation efficiency. CB: max-min computed bits (eta fixed to 0).
enum class Framework { CE, CB };
const char* framework_name(Framework f);

// Parametric problem of one regime. NOMA regimes accept users in any order: they are sorted by
// gain internally and the allocation is returned in the caller's order. The returned problem keeps
// warm-start state, so calls should follow the Dinkelbach sequence of eta.
ParametricProblem make_problem(Regime regime, const Users& users, const SystemParams& sys);

// Ps fixed to sys.P_th.
SolveReport solve_regime(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                         double eta0 = 0.0);

// Ps treated as a variable in [0, P_th]: coarse grid then golden-section refinement of the
// solved objective (eta* for CE, min bits for CB). alloc.Ps holds the maximizer.
SolveReport solve_free_ps(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                          int grid = 16);

// Per-user metrics of an allocation in the caller's user order. Unlike evaluate, NOMA users
// need not be sorted by gain.
std::vector<PerUserMetrics> regime_metrics(const Allocation& a, Regime regime, const Users& users,
                                           const SystemParams& sys);

// Objective a framework maximizes: eta* for CE, min_k R_k for CB.
double framework_objective(const SolveReport& r, Regime regime, Framework framework, const Users& users,
                           const SystemParams& sys);

}  // namespace wpmec
