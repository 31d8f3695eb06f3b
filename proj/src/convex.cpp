#include "wpmec/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wpmec/barrier.hpp"

namespace wpmec {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kTauClamp = 1e-10;

using Program = ConvexProgram<double>;
using Vec = Program::Vector;
using Mat = Program::Matrix;

}  // namespace

DualVars DualVars::zeros(int K) {
  DualVars d;
  d.lambda = d.rho = d.theta = VectorXd::Zero(K);
  d.mu = d.chi = VectorXd::Zero(K);
  d.varpi = d.omega = VectorXd::Zero(K);
  return d;
}

Allocation InnerSolution::allocation(double Ps) const {
  const int K = static_cast<int>(f.size());
  Allocation a = Allocation::zeros(K, Ps);
  a.tau0 = tau0;
  if (tau.size() == K) a.tau = tau;
  a.tau1 = tau1;
  a.P = P;
  a.f = f;
  a.alpha = alpha;
  return a;
}

Scales inner_scales(const Users& users, const SystemParams& sys) {
  Scales s;
  double pmax = sys.eh.P_max;
  for (const auto& u : users) pmax = std::max(pmax, harvested_power(u, sys.P_th, sys));
  s.E0 = sys.T * pmax;
  s.f0 = std::cbrt(s.E0 / (sys.T * sys.gamma_c));
  s.R0 = sys.T * s.f0 / sys.C;
  for (const auto& u : users) s.R0 = std::max(s.R0, u.R_min);
  return s;
}

PerspectiveRate perspective_rate(double tau, double w, double kappa, double c) {
  PerspectiveRate r{0.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()};
  if (tau <= 0.0) {
    r.value = (w >= 0.0) ? 0.0 : std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double q = c * w / tau;
  if (q <= -1.0) {
    r.value = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double L = std::log1p(q) / kLn2;
  const double den = tau + c * w;
  r.value = kappa * tau * L;
  r.grad(0) = kappa * (L - c * w / (den * kLn2));
  r.grad(1) = kappa * c * tau / (den * kLn2);
  const double k2 = kappa * c * c / (kLn2 * den * den);
  r.hess(0, 0) = -k2 * w * w / tau;
  r.hess(0, 1) = r.hess(1, 0) = k2 * w;
  r.hess(1, 1) = -k2 * tau;
  return r;
}

namespace {

struct UserLayout {
  int a = -1, w = -1, s = -1;  // variable indices, -1 when inert
  double wl = 1.0, wo = 1.0;   // local / offload weights
  double pr = 0.0, pe = 0.0, pc = 0.0, kappa = 0.0, c = 0.0;
  double ell = 1.0;  // local bits per unit s, in R0
};

// Offload bits of user k in units of R0 (zero when inert).
double offload_scaled(const UserLayout& L, const Vec& x, Vec* g, Mat* H) {
  if (L.a < 0) return 0.0;
  const PerspectiveRate r = perspective_rate(x(L.a), x(L.w), L.kappa, L.c);
  if (g) {
    (*g)(L.a) += L.wo * r.grad(0);
    (*g)(L.w) += L.wo * r.grad(1);
  }
  if (H) {
    (*H)(L.a, L.a) += L.wo * r.hess(0, 0);
    (*H)(L.a, L.w) += L.wo * r.hess(0, 1);
    (*H)(L.w, L.a) += L.wo * r.hess(1, 0);
    (*H)(L.w, L.w) += L.wo * r.hess(1, 1);
  }
  return L.wo * r.value;
}

// Consumed energy of user k in units of E0.
double energy_scaled(const UserLayout& L, int a0, const Vec& x, Vec* g, Mat* H) {
  double e = L.pr * x(a0);
  if (g) (*g)(a0) += L.pr;
  if (L.a >= 0) {
    e += L.wo * (x(L.w) + L.pc * x(L.a));
    if (g) {
      (*g)(L.w) += L.wo;
      (*g)(L.a) += L.wo * L.pc;
    }
  }
  if (L.s >= 0) {
    const double s = x(L.s);
    e += L.wl * s * s * s;
    if (g) (*g)(L.s) += 3.0 * L.wl * s * s;
    if (H) (*H)(L.s, L.s) += 6.0 * L.wl * s;
  }
  return e;
}

InnerSolution zero_solution(int K) {
  InnerSolution out;
  out.tau = out.y = out.P = out.f = VectorXd::Zero(K);
  out.duals = DualVars::zeros(K);
  return out;
}

InnerSolution solve_tdma(double eta, const VectorXd& alpha, bool binary, const Users& users,
                         const SystemParams& sys) {
  sys.validate();
  const int K = static_cast<int>(users.size());
  if (K == 0) throw SolverError(ErrorKind::InvalidInput, "no users");
  for (const auto& u : users) u.validate();
  if (eta < 0) throw SolverError(ErrorKind::InvalidInput, "eta must be >= 0");
  if (binary && alpha.size() != K) throw SolverError(ErrorKind::InvalidInput, "alpha size mismatch");
  if (binary && ((alpha.array() < 0).any() || (alpha.array() > 1).any()))
    throw SolverError(ErrorKind::InvalidInput, "alpha must lie in [0, 1]");

  const Scales sc = inner_scales(users, sys);
  const double eta_s = eta * sc.E0 / sc.R0;

  std::vector<UserLayout> lay(K);
  int n = 0;
  const int a0 = n++;
  bool starved = false;
  for (int k = 0; k < K; ++k) {
    const UserParams& u = users[k];
    UserLayout& L = lay[k];
    L.wl = binary ? 1.0 - alpha(k) : 1.0;
    L.wo = binary ? alpha(k) : 1.0;
    L.pr = sys.T * u.P_r / sc.E0;
    L.pe = sys.T * harvested_power(u, sys.P_th, sys) / sc.E0;
    L.pc = sys.T * u.P_c / sc.E0;
    L.kappa = sys.B * sys.T / (u.v * sc.R0);
    L.ell = sys.T * sc.f0 / (sys.C * sc.R0);
    L.c = u.g * sc.E0 / (sys.T * sys.sigma2 * sys.zeta);
    if (L.pe < L.pr) starved = true;
    if (L.pe <= L.pr) continue;  // no net energy: user cannot compute
    if (L.wl > 0) L.s = n++;
    if (L.wo > 0 && u.g > 0) {
      L.a = n++;
      L.w = n++;
    }
  }
  const int ups = n++;

  // Some user loses energy whenever tau0 > 0, so tau0 = 0 and nothing can be computed.
  if (starved) {
    for (const auto& u : users)
      if (u.R_min > 0)
        throw SolverError(ErrorKind::Infeasible, "a user harvests less than its receive power", 1.0);
    InnerSolution out = zero_solution(K);
    out.eta = eta;
    if (binary) out.alpha = alpha;
    return out;
  }

  // Variables: a0 = tau0/T, a_k = tau_k/T, w_k = zeta y_k/E0, s_k = f_k/f0, ups = Upsilon/R0.
  // With w carrying zeta the offload energy is wo (w + zeta pc a) and the rate uses c / zeta.
  Program prog(n);
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
    UserLayout& L = lay[k];
    L.pc *= sys.zeta;
    const double rmin = users[k].R_min / sc.R0;
    auto bits = [L](const Vec& x, Vec* g, Mat* H) {
      double b = offload_scaled(L, x, g, H);
      if (L.s >= 0) {
        b += L.wl * L.ell * x(L.s);
        if (g) (*g)(L.s) += L.wl * L.ell;
      }
      return b;
    };
    const bool inert = L.s < 0 && L.a < 0;
    if (rmin > 0) {
      if (inert)
        throw SolverError(ErrorKind::Infeasible, "user cannot compute any bits", rmin);
      tags.push_back({prog.add(
                          [bits, rmin](const Vec& x, Vec* g, Mat* H) {
                            const double v = rmin - bits(x, g, H);
                            if (g) *g = -*g;
                            if (H) *H = -*H;
                            return v;
                          },
                          false, "min_bits"),
                      Bits, k});
    }
    if (L.pe > L.pr) {
      tags.push_back({prog.add(
                          [L, a0](const Vec& x, Vec* g, Mat* H) {
                            const double e = energy_scaled(L, a0, x, g, H);
                            if (g) (*g)(a0) -= L.pe;
                            return e - L.pe * x(a0);
                          },
                          false, "eh_causality"),
                      Eh, k});
    }
    tags.push_back({prog.add(
                        [L, a0, ups, bits, eta_s](const Vec& x, Vec* g, Mat* H) {
                          Vec ge = Vec::Zero(x.size());
                          Mat He = Mat::Zero(x.size(), x.size());
                          const double e = energy_scaled(L, a0, x, g ? &ge : nullptr, H ? &He : nullptr);
                          const double b = bits(x, g, H);
                          if (g) {
                            *g = -*g + eta_s * ge;
                            (*g)(ups) += 1.0;
                          }
                          if (H) *H = -*H + eta_s * He;
                          return x(ups) - b + eta_s * e;
                        },
                        false, "epigraph"),
                    Epi, k});
    if (L.s >= 0) prog.add_lower(L.s, 0.0, true, "f_nonneg");
    if (L.a >= 0) {
      prog.add_lower(L.a, 0.0, true, "tau_nonneg");
      prog.add_lower(L.w, 0.0, true, "y_nonneg");
      prog.add_upper(L.a, 1.0, false, "tau_cap");
    }
  }
  prog.add_lower(a0, 0.0, true, "tau0_nonneg");
  std::vector<std::pair<int, double>> time{{a0, 1.0}};
  for (int k = 0; k < K; ++k)
    if (lay[k].a >= 0) time.push_back({lay[k].a, lay[k].wo});
  const int time_idx = prog.add_linear(time, 1.0, false, "time_budget");

  // Start: half the frame harvesting, 40% shared by offloaders, 10% of the net harvest on each side.
  Vec x0 = Vec::Zero(n);
  x0(a0) = 0.5;
  int n_off = 0;
  for (const auto& L : lay) n_off += L.a >= 0;
  for (int k = 0; k < K; ++k) {
    const UserLayout& L = lay[k];
    const double net = x0(a0) * (L.pe - L.pr);
    if (L.s >= 0) x0(L.s) = std::cbrt(0.1 * net / L.wl);
    if (L.a >= 0) {
      double a = 0.4 / n_off;
      if (L.pc > 0) a = std::min(a, 0.05 * net / (L.wo * L.pc));
      x0(L.a) = a;
      x0(L.w) = 0.1 * net / L.wo - L.pc * a;
    }
  }
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& tg : tags)
    if (tg.kind == Epi) {
      x0(ups) = 0.0;
      worst = std::min(worst, -prog.eval(tg.index, x0, nullptr, nullptr));
    }
  x0(ups) = worst - 1.0;

  const BarrierResult<double> res = barrier_solve(prog, x0);
  const Vec& x = res.x;

  InnerSolution out = zero_solution(K);
  out.eta = eta;
  if (binary) out.alpha = alpha;
  out.Upsilon = sc.R0 * x(ups);
  out.tau0 = sys.T * x(a0);
  out.kkt_residual = res.kkt_residual;
  out.newton_steps = res.newton_steps;
  for (int k = 0; k < K; ++k) {
    const UserLayout& L = lay[k];
    if (L.s >= 0) out.f(k) = sc.f0 * x(L.s);
    if (L.a >= 0) {
      out.tau(k) = sys.T * x(L.a);
      out.y(k) = sc.E0 * x(L.w) / sys.zeta;
      out.P(k) = out.y(k) / out.tau(k);
    }
  }
  // Drop numerically vanishing offload slots unless the minimum-bits constraint needs them.
  for (int k = 0; k < K; ++k) {
    if (lay[k].a < 0 || out.tau(k) >= kTauClamp) continue;
    const double wl = lay[k].wl, wo = lay[k].wo;
    const double kept = wl * local_bits(out.f(k), sys);
    const double full = kept + wo * offload_bits_tdma(out.tau(k), out.P(k), users[k], sys);
    if (kept >= users[k].R_min || full < users[k].R_min) {
      out.tau(k) = out.y(k) = out.P(k) = 0.0;
    }
  }

  DualVars& d = out.duals;
  for (const auto& tg : tags) {
    const double lam = res.duals(tg.index);
    switch (tg.kind) {
      case Bits: d.lambda(tg.user) = lam; break;
      case Eh: d.rho(tg.user) = lam * sc.R0 / sc.E0; break;
      case Epi: d.theta(tg.user) = lam; break;
    }
  }
  d.beta = res.duals(time_idx) * sc.R0 / sys.T;
  if (binary) {
    d.mu = d.rho;
    d.chi = d.theta;
    d.upsilon = d.beta;
  }
  return out;
}

}  // namespace

InnerSolution solve_p3(double eta, const Users& users, const SystemParams& sys) {
  return solve_tdma(eta, VectorXd(), false, users, sys);
}

InnerSolution solve_p6(double eta, const VectorXd& alpha, const Users& users, const SystemParams& sys) {
  return solve_tdma(eta, alpha, true, users, sys);
}

}  // namespace wpmec
