#include "wpmec/nomasca.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "wpmec/barrier.hpp"

namespace wpmec {

namespace {

constexpr double kTauClamp = 1e-10;

using Program = ConvexProgram<double>;
using Vec = Program::Vector;
using Mat = Program::Matrix;

struct NomaUser {
  int s = -1, w = -1;  // variable indices, -1 when absent
  double wl = 1.0, wo = 1.0;
  double pr = 0.0, pe = 0.0, pc = 0.0;  // pc carries zeta
  double c = 0.0;      // g E0 / (T sigma2 zeta): SINR numerator per unit of w
  double kappa = 0.0;  // B T / (v R0)
  std::vector<int> above;  // offloading users decoded after this one
};

struct Layout {
  Scales sc;
  double ell = 1.0;  // local bits per unit s, in R0
  int a0 = -1, a1 = -1, ups = -1, n = 0;
  std::vector<NomaUser> u;
  bool starved = false;
};

Layout make_layout(const VectorXd& alpha, bool binary, bool local_only, const Users& users,
                   const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  Layout L;
  L.sc = inner_scales(users, sys);
  L.ell = sys.T * L.sc.f0 / (sys.C * L.sc.R0);
  L.u.resize(K);
  L.a0 = L.n++;
  bool any_off = false;
  for (int k = 0; k < K; ++k) {
    NomaUser& v = L.u[k];
    const UserParams& p = users[k];
    v.wl = binary ? 1.0 - alpha(k) : 1.0;
    v.wo = binary ? alpha(k) : 1.0;
    v.pr = sys.T * p.P_r / L.sc.E0;
    v.pe = sys.T * harvested_power(p, sys.P_th, sys) / L.sc.E0;
    v.pc = sys.zeta * sys.T * p.P_c / L.sc.E0;
    v.c = p.g * L.sc.E0 / (sys.T * sys.sigma2 * sys.zeta);
    v.kappa = sys.B * sys.T / (p.v * L.sc.R0);
    if (v.pe < v.pr) L.starved = true;
    if (v.pe <= v.pr) continue;
    if (v.wl > 0) v.s = L.n++;
    if (!local_only && v.wo > 0 && p.g > 0) {
      v.w = L.n++;
      any_off = true;
    }
  }
  for (int k = 0; k < K; ++k)
    if (L.u[k].w >= 0)
      for (int i = k + 1; i < K; ++i)
        if (L.u[i].w >= 0) L.u[k].above.push_back(i);
  if (any_off) L.a1 = L.n++;
  L.ups = L.n++;
  return L;
}

// Interference seen by user k, in SINR-numerator units.
double interference(const Layout& L, int k, const VectorXd& w) {
  double I = 0.0;
  for (int i : L.u[k].above) I += L.u[i].wo * L.u[i].c * w(i);
  return I;
}

// Tangent of Phi(a1, I_k) at the linearization point: value + da (a1 - a1_bar) + du (I - I_bar).
struct Tangent {
  double value = 0.0, a_bar = 0.0, I_bar = 0.0, da = 0.0, du = 0.0;
};

// Surrogate bits of user k in units of R0: exact signal perspective minus the tangent of the
// interference perspective.
double bits(const Layout& L, int k, const Tangent& tan, const Vec& x, Vec* g, Mat* H) {
  const NomaUser& v = L.u[k];
  double b = 0.0;
  if (v.s >= 0) {
    b += v.wl * L.ell * x(v.s);
    if (g) (*g)(v.s) += v.wl * L.ell;
  }
  if (v.w < 0) return b;
  const double scale = v.wo * v.kappa;
  std::vector<std::pair<int, double>> terms{{v.w, v.c}};
  for (int i : v.above) terms.push_back({L.u[i].w, L.u[i].wo * L.u[i].c});
  double S = 0.0;
  for (const auto& [j, a] : terms) S += a * x(j);
  const PerspectiveRate r = perspective_rate(x(L.a1), S, 1.0, 1.0);
  const double I = S - v.c * x(v.w);
  b += scale * (r.value - tan.value - tan.da * (x(L.a1) - tan.a_bar) - tan.du * (I - tan.I_bar));
  if (g) {
    (*g)(L.a1) += scale * (r.grad(0) - tan.da);
    for (size_t t = 0; t < terms.size(); ++t) {
      const auto& [j, a] = terms[t];
      (*g)(j) += scale * a * r.grad(1);
      if (t > 0) (*g)(j) -= scale * a * tan.du;
    }
  }
  if (H) {
    (*H)(L.a1, L.a1) += scale * r.hess(0, 0);
    for (const auto& [j, a] : terms) {
      (*H)(L.a1, j) += scale * a * r.hess(0, 1);
      (*H)(j, L.a1) += scale * a * r.hess(0, 1);
      for (const auto& [l, c] : terms) (*H)(j, l) += scale * a * c * r.hess(1, 1);
    }
  }
  return b;
}

// Consumed energy of user k in units of E0.
double energy(const Layout& L, int k, const Vec& x, Vec* g, Mat* H) {
  const NomaUser& v = L.u[k];
  double e = v.pr * x(L.a0);
  if (g) (*g)(L.a0) += v.pr;
  if (v.w >= 0) {
    e += v.wo * (x(v.w) + v.pc * x(L.a1));
    if (g) {
      (*g)(v.w) += v.wo;
      (*g)(L.a1) += v.wo * v.pc;
    }
  }
  if (v.s >= 0) {
    const double s = x(v.s);
    e += v.wl * s * s * s;
    if (g) (*g)(v.s) += 3.0 * v.wl * s * s;
    if (H) (*H)(v.s, v.s) += 6.0 * v.wl * s;
  }
  return e;
}

void validate_inputs(double eta, const VectorXd& alpha, bool binary, const Users& users,
                     const SystemParams& sys) {
  sys.validate();
  if (users.empty()) throw SolverError(ErrorKind::InvalidInput, "no users");
  for (const auto& u : users) u.validate();
  check_noma_order(users);
  if (eta < 0) throw SolverError(ErrorKind::InvalidInput, "eta must be >= 0");
  const int K = static_cast<int>(users.size());
  if (binary && alpha.size() != K) throw SolverError(ErrorKind::InvalidInput, "alpha size mismatch");
  if (binary && ((alpha.array() < 0).any() || (alpha.array() > 1).any()))
    throw SolverError(ErrorKind::InvalidInput, "alpha must lie in [0, 1]");
}

ScaState init_state(const Layout& L, const Users& users) {
  const int K = static_cast<int>(users.size());
  ScaState st;
  st.w = st.s = VectorXd::Zero(K);
  st.a0 = 0.5;
  st.a1 = 0.4;
  for (const auto& v : L.u)
    if (v.w >= 0 && v.pc > 0) st.a1 = std::min(st.a1, 0.25 * st.a0 * (v.pe - v.pr) / v.pc);
  for (int k = 0; k < K; ++k) {
    const NomaUser& v = L.u[k];
    if (v.pe <= v.pr) continue;
    const double net = st.a0 * (v.pe - v.pr);
    st.s(k) = std::cbrt(0.1 * net);
    st.w(k) = 0.25 * net;
  }
  st.initialized = true;
  return st;
}

InnerSolution zero_solution(int K) {
  InnerSolution out;
  out.tau = out.y = out.P = out.f = VectorXd::Zero(K);
  out.duals = DualVars::zeros(K);
  return out;
}

// Normal: a regular step. Retry: the step after a restoration (no second restoration).
// Restore: a restoration step, which skips the local-only comparison so the returned solution
// is the iterate stored in the next state.
enum class Step { Normal, Retry, Restore };

std::pair<InnerSolution, ScaState> solve_noma(double eta, const VectorXd& alpha, bool binary,
                                              bool local_only, const ScaState& state_in,
                                              const Users& users, const SystemParams& sys,
                                              Step mode = Step::Normal);

// Finds a linearization point whose true bits meet every R_min, by maximizing the minimum
// bits with the requirements dropped. Empty when the SCA cannot reach one.
std::optional<ScaState> restore_feasibility(const VectorXd& alpha, bool binary, ScaState st,
                                            const Users& users, const SystemParams& sys) {
  Users relaxed = users;
  for (auto& u : relaxed) u.R_min = 0.0;
  const Regime regime = binary ? Regime::NomaBinary : Regime::NomaPartial;
  // Restoration steps optimize another objective and stay out of the trace.
  const std::vector<double> trace = st.trace;
  for (int j = 0; j < sys.max_sca_iters; ++j) {
    auto [s, next] = solve_noma(0.0, alpha, binary, false, st, relaxed, sys, Step::Restore);
    st = std::move(next);
    st.trace = trace;
    const auto m = evaluate(s.allocation(sys.P_th), regime, users, sys);
    bool ok = s.tau1 > 0.0;
    for (size_t k = 0; k < users.size(); ++k) ok = ok && m[k].bits > users[k].R_min;
    if (ok) return st;
  }
  return std::nullopt;
}

std::pair<InnerSolution, ScaState> solve_noma(double eta, const VectorXd& alpha, bool binary,
                                              bool local_only, const ScaState& state_in,
                                              const Users& users, const SystemParams& sys, Step mode) {
  validate_inputs(eta, alpha, binary, users, sys);
  const int K = static_cast<int>(users.size());
  const Layout L = make_layout(alpha, binary, local_only, users, sys);
  const Scales& sc = L.sc;
  const double eta_s = eta * sc.E0 / sc.R0;

  ScaState st = state_in;
  if (L.starved) {
    for (const auto& u : users)
      if (u.R_min > 0)
        throw SolverError(ErrorKind::Infeasible, "a user harvests less than its receive power", 1.0);
    InnerSolution out = zero_solution(K);
    out.eta = eta;
    if (binary) out.alpha = alpha;
    ++st.j;
    st.trace.push_back(0.0);
    return {out, st};
  }

  // Linearization point: the state where it is usable, the default start elsewhere.
  const ScaState fresh = init_state(L, users);
  if (!st.initialized || st.w.size() != K || st.s.size() != K) {
    st.a0 = fresh.a0;
    st.a1 = fresh.a1;
    st.w = fresh.w;
    st.s = fresh.s;
    st.initialized = true;
  }
  if (!(st.a1 > 0.0)) st.a1 = fresh.a1;
  if (!(st.a0 > 0.0)) st.a0 = fresh.a0;
  // Zero powers are valid tangent points (a binary seed has them); only the barrier start
  // needs the interior.
  const VectorXd w_lin = st.w.cwiseMax(0.0);
  for (int k = 0; k < K; ++k) {
    if (L.u[k].w >= 0 && !(st.w(k) > 0.0)) st.w(k) = fresh.w(k);
    if (L.u[k].s >= 0 && !(st.s(k) > 0.0)) st.s(k) = fresh.s(k);
  }
  std::vector<Tangent> tan(K);
  if (L.a1 >= 0)
    for (int k = 0; k < K; ++k) {
      if (L.u[k].w < 0 || L.u[k].above.empty()) continue;
      Tangent& t = tan[k];
      t.a_bar = st.a1;
      t.I_bar = interference(L, k, w_lin);
      const PerspectiveRate r = perspective_rate(t.a_bar, t.I_bar, 1.0, 1.0);
      t.value = r.value;
      t.da = r.grad(0);
      t.du = r.grad(1);
    }

  // Variables: a0 = tau0/T, a1 = tau1/T, w_k = zeta tau1 P_k/E0, s_k = f_k/f0, ups = Upsilon/R0.
  Program prog(L.n);
  const int ups = L.ups;
  prog.objective = [ups](const Vec& x, Vec* g, Mat*) {
    if (g) (*g)(ups) = 1.0;
    return x(ups);
  };
  enum Kind { Bits, Eh, Epi };
  struct Tag {
    int index;
    Kind kind;
    int user;
  };
  std::vector<Tag> tags;
  for (int k = 0; k < K; ++k) {
    const NomaUser& v = L.u[k];
    const Tangent tk = tan[k];
    const double rmin = users[k].R_min / sc.R0;
    if (rmin > 0) {
      if (v.s < 0 && v.w < 0) throw SolverError(ErrorKind::Infeasible, "user cannot compute any bits", rmin);
      tags.push_back({prog.add(
                          [&L, k, tk, rmin](const Vec& x, Vec* g, Mat* H) {
                            const double b = bits(L, k, tk, x, g, H);
                            if (g) *g = -*g;
                            if (H) *H = -*H;
                            return rmin - b;
                          },
                          false, "min_bits"),
                      Bits, k});
    }
    if (v.pe > v.pr) {
      tags.push_back({prog.add(
                          [&L, k](const Vec& x, Vec* g, Mat* H) {
                            const double e = energy(L, k, x, g, H);
                            if (g) (*g)(L.a0) -= L.u[k].pe;
                            return e - L.u[k].pe * x(L.a0);
                          },
                          false, "eh_causality"),
                      Eh, k});
    }
    tags.push_back({prog.add(
                        [&L, k, tk, eta_s](const Vec& x, Vec* g, Mat* H) {
                          Vec ge = Vec::Zero(x.size());
                          Mat He = Mat::Zero(x.size(), x.size());
                          const double e = energy(L, k, x, g ? &ge : nullptr, H ? &He : nullptr);
                          const double b = bits(L, k, tk, x, g, H);
                          if (g) {
                            *g = -*g + eta_s * ge;
                            (*g)(L.ups) += 1.0;
                          }
                          if (H) *H = -*H + eta_s * He;
                          return x(L.ups) - b + eta_s * e;
                        },
                        false, "epigraph"),
                    Epi, k});
    if (v.s >= 0) prog.add_lower(v.s, 0.0, true, "f_nonneg");
    if (v.w >= 0) prog.add_lower(v.w, 0.0, true, "y_nonneg");
  }
  prog.add_lower(L.a0, 0.0, true, "tau0_nonneg");
  std::vector<std::pair<int, double>> time{{L.a0, 1.0}};
  if (L.a1 >= 0) {
    prog.add_lower(L.a1, 0.0, true, "tau1_nonneg");
    time.push_back({L.a1, 1.0});
  }
  const int time_idx = prog.add_linear(time, 1.0, false, "time_budget");

  Vec x0 = Vec::Zero(L.n);
  x0(L.a0) = st.a0;
  if (L.a1 >= 0) x0(L.a1) = st.a1;
  for (int k = 0; k < K; ++k) {
    if (L.u[k].s >= 0) x0(L.u[k].s) = st.s(k);
    if (L.u[k].w >= 0) x0(L.u[k].w) = st.w(k);
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& tg : tags)
    if (tg.kind == Epi) {
      x0(ups) = 0.0;
      worst = std::min(worst, -prog.eval(tg.index, x0, nullptr, nullptr));
    }
  x0(ups) = worst - 1.0;

  BarrierResult<double> res;
  try {
    res = barrier_solve(prog, x0);
  } catch (const SolverError& e) {
    // The surrogate under-states bits, so a poor linearization point can make R_min look
    // unreachable. Move the point first; failing that, tau1 = 0 is the remaining candidate.
    if (e.kind() != ErrorKind::Infeasible || mode != Step::Normal || L.a1 < 0) throw;
    if (auto rs = restore_feasibility(alpha, binary, st, users, sys))
      return solve_noma(eta, alpha, binary, local_only, *rs, users, sys, Step::Retry);
    auto local = solve_noma(eta, alpha, binary, true, st, users, sys, Step::Retry);
    local.second.surrogate = std::numeric_limits<double>::quiet_NaN();
    return local;
  }
  const Vec& x = res.x;

  InnerSolution out = zero_solution(K);
  out.eta = eta;
  if (binary) out.alpha = alpha;
  out.Upsilon = sc.R0 * x(ups);
  out.tau0 = sys.T * x(L.a0);
  out.kkt_residual = res.kkt_residual;
  out.newton_steps = res.newton_steps;
  if (L.a1 >= 0) out.tau1 = sys.T * x(L.a1);
  for (int k = 0; k < K; ++k) {
    const NomaUser& v = L.u[k];
    if (v.s >= 0) out.f(k) = sc.f0 * x(v.s);
    if (v.w >= 0 && out.tau1 > 0) out.P(k) = sc.E0 * x(v.w) / (sys.zeta * out.tau1);
  }
  // Drop a numerically vanishing shared slot unless some minimum-bits constraint needs it.
  if (L.a1 >= 0 && out.tau1 < kTauClamp) {
    bool keep = false;
    for (int k = 0; k < K; ++k)
      if (L.u[k].wl * local_bits(out.f(k), sys) < users[k].R_min) keep = true;
    if (!keep) {
      out.tau1 = 0.0;
      out.P.setZero();
    }
  }

  DualVars& dv = out.duals;
  for (const auto& tg : tags) {
    const double lam = res.duals(tg.index);
    switch (tg.kind) {
      case Bits: dv.varpi(tg.user) = lam; break;
      case Eh: dv.mu(tg.user) = lam * sc.R0 / sc.E0; break;
      case Epi: dv.omega(tg.user) = lam; break;
    }
  }
  // Marginal value of one offloaded bit, the multiplier of the rate constraint in log form.
  dv.lambda = dv.varpi + dv.omega;
  dv.rho = dv.mu;
  dv.theta = dv.omega;
  dv.upsilon = dv.beta = res.duals(time_idx) * sc.R0 / sys.T;

  // Next linearization point: this iterate.
  ScaState next = st;
  next.a0 = x(L.a0);
  if (L.a1 >= 0) next.a1 = x(L.a1);
  for (int k = 0; k < K; ++k) {
    if (L.u[k].s >= 0) next.s(k) = x(L.u[k].s);
    if (L.u[k].w >= 0) next.w(k) = x(L.u[k].w);
  }
  ++next.j;
  next.surrogate = out.Upsilon;

  // tau1 = 0 removes every interference term, so compare against that exact optimum as well.
  if (L.a1 >= 0 && mode != Step::Restore) {
    try {
      InnerSolution local = solve_noma(eta, alpha, binary, true, st, users, sys, Step::Retry).first;
      if (local.Upsilon > out.Upsilon) {
        local.newton_steps += out.newton_steps;
        out = std::move(local);
      }
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
    }
  }
  next.trace.push_back(out.Upsilon);
  return {out, next};
}

}  // namespace

ScaState sca_init(const VectorXd& alpha, const Users& users, const SystemParams& sys) {
  const bool binary = alpha.size() > 0;
  validate_inputs(0.0, alpha, binary, users, sys);
  return init_state(make_layout(alpha, binary, false, users, sys), users);
}

std::pair<InnerSolution, ScaState> solve_p9(double eta, const ScaState& state, const Users& users,
                                            const SystemParams& sys) {
  return solve_noma(eta, VectorXd(), false, false, state, users, sys);
}

std::pair<InnerSolution, ScaState> solve_p11(double eta, const VectorXd& alpha, const ScaState& state,
                                             const Users& users, const SystemParams& sys) {
  return solve_noma(eta, alpha, true, false, state, users, sys);
}

InnerSolution sca_loop(const ScaStep& step, ScaState* state, const SystemParams& sys) {
  ScaState local;
  ScaState& st = state ? *state : local;
  st.j = 0;
  st.trace.clear();
  InnerSolution sol;
  int newton = 0;
  double prev = std::numeric_limits<double>::quiet_NaN(), prev_sur = prev;
  auto settled = [&](double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || std::abs(a - b) <= sys.tol_sca * std::max(1.0, std::abs(a));
  };
  for (int j = 0; j < sys.max_sca_iters; ++j) {
    auto [s, next] = step(st);
    st = std::move(next);
    newton += s.newton_steps;
    sol = std::move(s);
    if (j > 0 && settled(sol.Upsilon, prev) && settled(st.surrogate, prev_sur)) break;
    prev = sol.Upsilon;
    prev_sur = st.surrogate;
  }
  sol.sca_iterations = st.j;
  sol.newton_steps = newton;
  return sol;
}

}  // namespace wpmec
