#include "wpmec/binary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wpmec/regimes.hpp"

namespace wpmec {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

// Energy left for computing after receiving during tau0.
double net_budget(double tau0, const UserParams& u, const SystemParams& sys) {
  return std::max(0.0, tau0 * (harvested_power(u, sys.P_th, sys) - u.P_r));
}

// Local frequency suggested by the multipliers, capped by the energy budget.
double candidate_frequency(double bits_w, double energy_w, double budget, const SystemParams& sys) {
  const double cap = std::cbrt(budget / (sys.T * sys.gamma_c));
  if (bits_w <= 0) return 0.0;
  if (!(energy_w > 0)) return cap;
  return std::min(cap, std::sqrt(bits_w / (3.0 * sys.C * sys.gamma_c * energy_w)));
}

// Transmit power suggested by the multipliers: [bits_w B/(v ln2 zeta energy_w) - (I + sigma2)/g]^+.
double candidate_power(double bits_w, double energy_w, double interference, const UserParams& u,
                       const SystemParams& sys) {
  if (u.g <= 0 || bits_w <= 0 || !(energy_w > 0)) return 0.0;
  return std::max(0.0, bits_w * sys.B / (u.v * kLn2 * sys.zeta * energy_w) - (interference + sys.sigma2) / u.g);
}

// Fill in the variables of the mode a user is not using, so that both scores are informative.
InnerSolution complete_tdma(const InnerSolution& sol, const VectorXd& alpha, double eta, const Users& users,
                            const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  InnerSolution c = sol;
  const DualVars& d = sol.duals;
  double used = c.tau0;
  for (int k = 0; k < K; ++k)
    if (alpha(k) > 0) used += c.tau(k);
  for (int k = 0; k < K; ++k) {
    const double bw = d.lambda(k) + d.chi(k), ew = d.mu(k) + d.chi(k) * eta;
    const double budget = net_budget(c.tau0, users[k], sys);
    if (alpha(k) > 0) {
      c.f(k) = candidate_frequency(bw, ew, budget, sys);
      continue;
    }
    const double P = candidate_power(bw, ew, 0.0, users[k], sys);
    if (P <= 0) {
      c.tau(k) = c.y(k) = c.P(k) = 0.0;
      continue;
    }
    const double tau = std::clamp(budget / (sys.zeta * (P + users[k].P_c)), 0.0, std::max(0.0, sys.T - used));
    c.tau(k) = tau;
    c.P(k) = P;
    c.y(k) = tau * P;
  }
  return c;
}

InnerSolution complete_noma(const InnerSolution& sol, const VectorXd& alpha, double eta, const Users& users,
                            const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  InnerSolution c = sol;
  c.alpha = alpha;
  const DualVars& d = sol.duals;
  double tau1 = 0.0;
  for (int k = K - 1; k >= 0; --k) {
    const double ew = d.mu(k) + d.omega(k) * eta;
    const double budget = net_budget(c.tau0, users[k], sys);
    if (alpha(k) > 0) {
      c.f(k) = candidate_frequency(d.varpi(k) + d.omega(k), ew, budget, sys);
      continue;
    }
    double I = 0.0;
    for (int i = k + 1; i < K; ++i) I += alpha(i) * users[i].g * c.P(i);
    const double P = candidate_power(d.lambda(k), ew, I, users[k], sys);
    c.P(k) = P;
    if (P > 0)
      tau1 = std::max(tau1, std::min(budget / (sys.zeta * (P + users[k].P_c)), sys.T - c.tau0));
  }
  if (!(c.tau1 > 0)) c.tau1 = tau1;
  return c;
}

}  // namespace

ModeScores mode_scores_tdma(const DualVars& d, const InnerSolution& cand, int k, double eta,
                            const UserParams& u, const SystemParams& sys) {
  const double bw = d.lambda(k) + d.chi(k), ew = d.mu(k) + d.chi(k) * eta;
  const double tau = cand.tau(k), y = cand.y(k), f = cand.f(k);
  ModeScores s;
  const double off = tau > 0 ? offload_bits_tdma(tau, y / tau, u, sys) : 0.0;
  s.F1 = bw * off - sys.zeta * ew * (y + tau * u.P_c) - d.upsilon * tau;
  s.F2 = bw * local_bits(f, sys) - ew * local_energy(f, sys);
  return s;
}

int mode_select_tdma(const DualVars& d, const InnerSolution& cand, int k, double eta, const UserParams& u,
                     const SystemParams& sys) {
  return mode_from_scores(mode_scores_tdma(d, cand, k, eta, u, sys));
}

ModeScores mode_scores_noma(const DualVars& d, const InnerSolution& cand, int k, double eta,
                            const Users& users, const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  const double ew = d.mu(k) + d.omega(k) * eta;
  double I = 0.0;
  for (int i = k + 1; i < K; ++i) I += (cand.alpha.size() == K ? cand.alpha(i) : 1.0) * users[i].g * cand.P(i);
  const UserParams& u = users[k];
  ModeScores s;
  const double rate = std::log2(1.0 + u.g * cand.P(k) / (I + sys.sigma2));
  s.F1 = cand.tau1 * (d.lambda(k) * sys.B / u.v * rate - sys.zeta * ew * (cand.P(k) + u.P_c));
  s.F2 = (d.varpi(k) + d.omega(k)) * local_bits(cand.f(k), sys) - ew * local_energy(cand.f(k), sys);
  return s;
}

VectorXd mode_select_noma(const DualVars& d, const InnerSolution& cand, double eta, const Users& users,
                          const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  VectorXd a(K);
  for (int k = 0; k < K; ++k) a(k) = mode_from_scores(mode_scores_noma(d, cand, k, eta, users, sys));
  return a;
}

VectorXd round_alpha(const VectorXd& relaxed) {
  if ((relaxed.array() < 0).any() || (relaxed.array() > 1).any())
    throw SolverError(ErrorKind::InvalidInput, "alpha must lie in [0, 1]");
  return (relaxed.array() >= 0.5).cast<double>().matrix();
}

InnerResult binary_inner(Regime regime, double eta, const Users& users, const SystemParams& sys,
                         BinaryState* state) {
  if (!is_binary(regime)) throw SolverError(ErrorKind::InvalidInput, "regime is not binary");
  const bool noma = is_noma(regime);
  const int K = static_cast<int>(users.size());
  BinaryState local;
  BinaryState& st = state ? *state : local;
  if (st.alpha.size() != K) st.alpha = VectorXd::Ones(K);

  int solves = 0;
  auto attempt = [&](const VectorXd& a, ScaState& sca, InnerSolution& out) {
    ++solves;
    try {
      if (noma)
        out = sca_loop([&](const ScaState& s) { return solve_p11(eta, a, s, users, sys); }, &sca, sys);
      else
        out = solve_p6(eta, a, users, sys);
      return true;
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
      return false;
    }
  };

  VectorXd alpha = round_alpha(st.alpha);
  InnerSolution best;
  ScaState best_sca = st.sca;
  bool ok = attempt(alpha, best_sca, best);
  for (const VectorXd& a : {VectorXd(VectorXd::Zero(K)), VectorXd(VectorXd::Ones(K))}) {
    if (ok) break;
    alpha = a;
    best_sca = st.sca;
    ok = attempt(alpha, best_sca, best);
  }
  if (!ok) throw SolverError(ErrorKind::Infeasible, "no mode vector admits a feasible allocation");
  std::vector<double> trace{best.Upsilon};

  auto better = [&](const InnerSolution& s, double than) {
    return s.Upsilon > than + 1e-9 * std::max(1.0, std::abs(than));
  };

  // Mode selection from the multipliers.
  int rounds = 0;
  while (rounds < sys.max_alt_iters) {
    ++rounds;
    VectorXd next(K);
    if (noma) {
      next = mode_select_noma(best.duals, complete_noma(best, alpha, eta, users, sys), eta, users, sys);
    } else {
      const InnerSolution cand = complete_tdma(best, alpha, eta, users, sys);
      for (int k = 0; k < K; ++k) next(k) = mode_select_tdma(best.duals, cand, k, eta, users[k], sys);
    }
    if (next == alpha) break;
    ScaState sca = best_sca;
    InnerSolution sol;
    if (!attempt(next, sca, sol) || !better(sol, best.Upsilon)) break;
    const double gain = sol.Upsilon - best.Upsilon;
    best = std::move(sol);
    best_sca = std::move(sca);
    alpha = next;
    trace.push_back(best.Upsilon);
    if (gain <= sys.tol_alt * std::max(1.0, std::abs(best.Upsilon))) break;
  }

  // Single-user flips catch what the first-order test misses.
  for (bool improved = true; improved && rounds < sys.max_alt_iters; ++rounds) {
    improved = false;
    InnerSolution pick;
    ScaState pick_sca;
    VectorXd pick_alpha;
    for (int k = 0; k < K; ++k) {
      VectorXd a = alpha;
      a(k) = 1.0 - a(k);
      ScaState sca = best_sca;
      InnerSolution sol;
      if (!attempt(a, sca, sol)) continue;
      if (better(sol, improved ? pick.Upsilon : best.Upsilon)) {
        pick = std::move(sol);
        pick_sca = std::move(sca);
        pick_alpha = a;
        improved = true;
      }
    }
    if (improved) {
      best = std::move(pick);
      best_sca = std::move(pick_sca);
      alpha = pick_alpha;
      trace.push_back(best.Upsilon);
    }
  }

  st.alpha = alpha;
  st.sca = best_sca;
  InnerResult r;
  r.Upsilon = best.Upsilon;
  r.alloc = best.allocation(sys.P_th);
  r.alloc.alpha = round_alpha(alpha);
  r.ratio = min_ce(evaluate(r.alloc, regime, users, sys));
  r.iterations = solves;
  r.trace = std::move(trace);
  return r;
}

SolveReport alternate_solve(Regime regime, const Users& users, const SystemParams& sys) {
  if (!is_binary(regime)) throw SolverError(ErrorKind::InvalidInput, "regime is not binary");
  return solve_regime(regime, Framework::CE, users, sys);
}

}  // namespace wpmec
