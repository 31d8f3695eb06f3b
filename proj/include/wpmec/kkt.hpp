#pragma once

#include "wpmec/convex.hpp"

namespace wpmec {

// Closed-form responses of the TDMA partial problem for given multipliers (natural units).

// sqrt((lambda + theta) / (3 C gamma_c (rho + theta eta))).
double optimal_frequency(const DualVars& d, int k, double eta, const SystemParams& sys);

// 0 when tau_k = 0, else [(lambda + theta) B / (zeta v ln2 (rho + theta eta)) - sigma2 / g]^+.
double optimal_power(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                     double tau_k);

enum class TimeDecision { Zero, Interior, AtCap };

struct Tau0Decision {
  TimeDecision kind;
  double z;  // derivative of the Lagrangian in tau0 (bits per second)
};
// z = sum rho (P_E - P_r) - beta - eta sum theta P_r. Throws PositiveZ when z > 0 beyond roundoff.
Tau0Decision tau0_rule(const DualVars& d, double eta, const Users& users, const SystemParams& sys);

// Channel-gain threshold omega solving Gamma(lambda, 0, beta, theta, omega) = 0.
double omega_root(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys);
// Left side of the threshold equation at w.
double omega_equation(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                      double w);

struct TauKContext {
  double tau0 = 0.0;
  double f = 0.0;
  double P = 0.0;
};
struct TauKDecision {
  TimeDecision kind;
  double Z;      // energy-limited offload time, clamped to [0, T - tau0]
  double omega;  // threshold used for the decision
};
TauKDecision tau_k_rule(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                        const TauKContext& ctx);

// 0 when sum theta > 1, else min_k R_k - eta E_k of the candidate allocation.
double upsilon_rule(const DualVars& d, const Allocation& candidate, double eta, const Users& users,
                    const SystemParams& sys);

// Lagrangian derivatives in f_k and y_k.
double lagrangian_df(const DualVars& d, int k, double eta, double f, const SystemParams& sys);
double lagrangian_dy(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                     double tau, double y);

struct DualAscentOptions {
  int max_steps = 5000;
  int recover_every = 25;
  double gap_tol = 1e-4;  // relative gap between dual bound and best primal
};

struct DualAscentResult {
  InnerSolution primal;  // best feasible primal found
  DualVars duals;        // multipliers matching the best primal
  double dual_bound = 0.0;
  double gap = 0.0;      // relative
  int steps = 0;
  bool gap_closed = false;
};

// Projected subgradient on the dual of the TDMA partial problem. Primal points are recovered by
// fixing f and P from the multipliers and solving the remaining linear program in (tau0, tau, Upsilon).
DualAscentResult dual_ascent_p3(double eta, const Users& users, const SystemParams& sys,
                                const DualAscentOptions& opt = {});

}  // namespace wpmec
