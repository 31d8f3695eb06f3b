#pragma once

#include "wpmec/fractional.hpp"
#include "wpmec/nomasca.hpp"

namespace wpmec {

// Lagrangian value of each mode for one user: F1 offloading, F2 local computing.
struct ModeScores {
  double F1 = 0.0;
  double F2 = 0.0;
};

// alpha = 0 iff F1 < F2 (ties offload).
inline int mode_from_scores(const ModeScores& s) { return s.F1 < s.F2 ? 0 : 1; }

// TDMA scores at the candidate's tau_k, y_k, f_k with multipliers lambda (min bits), mu (EH),
// chi (epigraph) and upsilon (time budget):
//   F1 = (lambda + chi) B tau/v log2(1 + g y/(tau sigma2)) - zeta (mu + chi eta)(y + tau P_c) - upsilon tau
//   F2 = (lambda + chi) T f/C - (mu + chi eta) T gamma_c f^3
ModeScores mode_scores_tdma(const DualVars& d, const InnerSolution& cand, int k, double eta,
                            const UserParams& u, const SystemParams& sys);
int mode_select_tdma(const DualVars& d, const InnerSolution& cand, int k, double eta, const UserParams& u,
                     const SystemParams& sys);

// NOMA scores at the candidate's tau1, P, f with multipliers lambda (rate), varpi (min bits),
// mu (EH) and omega (epigraph). Users ordered by nondecreasing g; interference counts the
// candidate's offloading users above k.
//   F1 = tau1 [lambda B/v log2(1 + g P/(I + sigma2)) - zeta (mu + omega eta)(P + P_c)]
//   F2 = (varpi + omega) T f/C - (mu + omega eta) T gamma_c f^3
ModeScores mode_scores_noma(const DualVars& d, const InnerSolution& cand, int k, double eta,
                            const Users& users, const SystemParams& sys);
VectorXd mode_select_noma(const DualVars& d, const InnerSolution& cand, double eta, const Users& users,
                          const SystemParams& sys);

// Threshold at 0.5, ties to 1.
VectorXd round_alpha(const VectorXd& relaxed);

// Carried across Dinkelbach iterations: the current modes and the NOMA linearization point.
struct BinaryState {
  VectorXd alpha;
  ScaState sca;
};

// Inner problem of a binary regime at fixed eta. Alternates {solve with alpha fixed} and
// {mode selection from the multipliers}, keeping a new alpha only when it raises Upsilon, then
// tries single-user flips until none helps. NOMA users must be ordered by nondecreasing g.
InnerResult binary_inner(Regime regime, double eta, const Users& users, const SystemParams& sys,
                         BinaryState* state);

// Dinkelbach over binary_inner, starting from alpha = 1.
SolveReport alternate_solve(Regime regime, const Users& users, const SystemParams& sys);

}  // namespace wpmec
