#include "wpmec/kkt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "wpmec/barrier.hpp"

namespace wpmec {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

double gain_ratio_num(const DualVars& d, int k) { return d.lambda(k) + d.theta(k); }
double gain_ratio_den(const DualVars& d, int k, double eta) { return d.rho(k) + d.theta(k) * eta; }

}  // namespace

double optimal_frequency(const DualVars& d, int k, double eta, const SystemParams& sys) {
  const double num = gain_ratio_num(d, k);
  if (num <= 0) return 0.0;
  const double den = 3.0 * sys.C * sys.gamma_c * gain_ratio_den(d, k, eta);
  if (!(den > 0)) throw SolverError(ErrorKind::DegenerateDuals, "rho + theta eta must be positive");
  return std::sqrt(num / den);
}

double optimal_power(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                     double tau_k) {
  if (tau_k <= 0) return 0.0;
  const double num = gain_ratio_num(d, k) * sys.B;
  if (num <= 0) return 0.0;
  const double den = sys.zeta * u.v * kLn2 * gain_ratio_den(d, k, eta);
  if (!(den > 0)) throw SolverError(ErrorKind::DegenerateDuals, "rho + theta eta must be positive");
  if (u.g <= 0 || u.g * num <= sys.sigma2 * den) return 0.0;
  return num / den - sys.sigma2 / u.g;
}

Tau0Decision tau0_rule(const DualVars& d, double eta, const Users& users, const SystemParams& sys) {
  double z = -d.beta, scale = d.beta;
  for (int k = 0; k < static_cast<int>(users.size()); ++k) {
    const double pe = harvested_power(users[k], sys.P_th, sys);
    z += d.rho(k) * (pe - users[k].P_r) - d.theta(k) * eta * users[k].P_r;
    scale += d.rho(k) * (pe + users[k].P_r) + d.theta(k) * eta * users[k].P_r;
  }
  const double tol = 1e-10 * std::max(scale, std::numeric_limits<double>::min());
  if (z > tol) throw SolverError(ErrorKind::PositiveZ, "Lagrangian unbounded in tau0", z);
  return {std::abs(z) <= tol ? TimeDecision::Interior : TimeDecision::Zero, z};
}

double omega_equation(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                      double w) {
  const double A = gain_ratio_num(d, k) * sys.B;
  const double te = d.theta(k) * eta;
  if (!(te > 0) || !(A > 0)) throw SolverError(ErrorKind::DegenerateCoefficients, "theta eta and lambda + theta must be positive");
  return A / u.v * std::log2(A * w / (sys.zeta * u.v * te * sys.sigma2 * kLn2)) - A / (u.v * kLn2) +
         sys.zeta * te * sys.sigma2 / w - sys.zeta * te * u.P_c - d.beta;
}

double omega_root(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys) {
  const double A = gain_ratio_num(d, k) * sys.B;
  const double te = d.theta(k) * eta;
  if (!(te > 0) || !(A > 0)) throw SolverError(ErrorKind::DegenerateCoefficients, "theta eta and lambda + theta must be positive");
  double lo = sys.sigma2 * sys.zeta * u.v * te * kLn2 / A;
  double hi = lo;
  int doublings = 0;
  while (omega_equation(d, k, eta, u, sys, hi) < 0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200) throw SolverError(ErrorKind::DegenerateCoefficients, "threshold bracket did not close");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (omega_equation(d, k, eta, u, sys, mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TauKDecision tau_k_rule(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                        const TauKContext& ctx) {
  const double harvested = harvested_energy(ctx.tau0, sys.P_th, u, sys);
  const double used = ctx.tau0 * u.P_r + local_energy(ctx.f, sys);
  const double num = harvested - used;
  if (num < -1e-12 * std::max(harvested, used))
    throw SolverError(ErrorKind::NegativeZ, "energy budget already exceeded", num);
  const double Z = std::clamp(std::max(num, 0.0) / (sys.zeta * (u.P_c + ctx.P)), 0.0,
                              std::max(0.0, sys.T - ctx.tau0));
  const double omega = omega_root(d, k, eta, u, sys);
  TimeDecision kind = TimeDecision::Zero;
  if (u.g > omega) kind = TimeDecision::AtCap;
  else if (u.g == omega) kind = TimeDecision::Interior;
  return {kind, Z, omega};
}

double upsilon_rule(const DualVars& d, const Allocation& candidate, double eta, const Users& users,
                    const SystemParams& sys) {
  if (d.theta.sum() > 1.0) return 0.0;
  const auto m = evaluate(candidate, Regime::TdmaPartial, users, sys);
  double v = std::numeric_limits<double>::infinity();
  for (const auto& x : m) v = std::min(v, x.bits - eta * x.energy);
  return v;
}

double lagrangian_df(const DualVars& d, int k, double eta, double f, const SystemParams& sys) {
  const double tg = sys.T * sys.gamma_c;
  return sys.T * d.lambda(k) / sys.C - 3.0 * d.rho(k) * tg * f * f +
         d.theta(k) * (sys.T / sys.C - 3.0 * eta * tg * f * f);
}

double lagrangian_dy(const DualVars& d, int k, double eta, const UserParams& u, const SystemParams& sys,
                     double tau, double y) {
  return (d.theta(k) + d.lambda(k)) * sys.B * tau * u.g / (u.v * kLn2 * (tau * sys.sigma2 + u.g * y)) -
         sys.zeta * (d.theta(k) * eta + d.rho(k));
}

namespace {

using Program = ConvexProgram<double>;
using Vec = Program::Vector;

// Per-user constants in the units of the inner solver (time T, energy E0, bits R0).
struct Unit {
  double ell, kappa, pr, pe, pc, rmin, s_max;
};

struct Context {
  const Users& users;
  const SystemParams& sys;
  Scales sc;
  double eta, eta_s;
  std::vector<Unit> u;
  double P_cap;
};

Context make_context(double eta, const Users& users, const SystemParams& sys) {
  Context c{users, sys, inner_scales(users, sys), eta, 0.0, {}, 0.0};
  c.eta_s = eta * c.sc.E0 / c.sc.R0;
  double pe_max = 0.0;
  for (const auto& x : users) {
    Unit n;
    n.ell = sys.T * c.sc.f0 / (sys.C * c.sc.R0);
    n.kappa = sys.B * sys.T / (x.v * c.sc.R0);
    n.pr = sys.T * x.P_r / c.sc.E0;
    n.pe = sys.T * harvested_power(x, sys.P_th, sys) / c.sc.E0;
    n.pc = sys.T * x.P_c / c.sc.E0;
    n.rmin = x.R_min / c.sc.R0;
    n.s_max = std::cbrt(std::max(n.pe, 0.0));
    c.u.push_back(n);
    pe_max = std::max(pe_max, harvested_power(x, sys.P_th, sys));
  }
  c.P_cap = 1e3 * std::max(pe_max, sys.eh.P_max);
  return c;
}

// Scaled multipliers: theta on the simplex, rho and beta in bits per scaled unit.
struct ScaledDuals {
  VectorXd lambda, rho, theta;
  double beta = 0.0;
};

DualVars natural(const ScaledDuals& s, const Context& c) {
  DualVars d = DualVars::zeros(static_cast<int>(s.lambda.size()));
  d.lambda = s.lambda;
  d.theta = s.theta;
  d.rho = s.rho * (c.sc.R0 / c.sc.E0);
  d.beta = s.beta * c.sc.R0 / c.sys.T;
  return d;
}

// Closed-form f and P with caps that never bind at the optimum; prev is kept when the user's
// multipliers leave the response undetermined.
void respond(const DualVars& d, const Context& c, VectorXd& f, VectorXd& P) {
  for (int k = 0; k < static_cast<int>(c.users.size()); ++k) {
    const double num = d.lambda(k) + d.theta(k);
    const double den = d.rho(k) + d.theta(k) * c.eta;
    const double f_cap = c.sc.f0 * c.u[k].s_max;
    if (num <= 0 && den <= 0) continue;
    if (den <= 0) {
      f(k) = f_cap;
      P(k) = c.users[k].g > 0 ? c.P_cap : 0.0;
      continue;
    }
    f(k) = std::min(optimal_frequency(d, k, c.eta, c.sys), f_cap);
    P(k) = std::min(optimal_power(d, k, c.eta, c.users[k], c.sys, 1.0), c.P_cap);
  }
}

// With f and P fixed, the rest of the problem is linear in (tau0, tau, Upsilon).
std::optional<InnerSolution> recover(const VectorXd& f, const VectorXd& P, const Context& c) {
  const int K = static_cast<int>(c.users.size());
  int n = 0;
  const int a0 = n++;
  std::vector<int> ai(K, -1);
  std::vector<double> rate(K, 0.0), e(K, 0.0), s(K);
  for (int k = 0; k < K; ++k) {
    s[k] = f(k) / c.sc.f0;
    if (P(k) > 0 && c.users[k].g > 0) {
      ai[k] = n++;
      rate[k] = c.u[k].kappa * std::log2(1.0 + c.users[k].g * P(k) / c.sys.sigma2);
      e[k] = c.sys.zeta * (c.sys.T * P(k) / c.sc.E0 + c.u[k].pc);
    }
  }
  const int ups = n++;
  Program lp(n);
  lp.objective = [ups](const Vec& x, Vec* g, Program::Matrix*) {
    if (g) (*g)(ups) = 1.0;
    return x(ups);
  };
  std::vector<int> ib(K, -1), ie(K), it(K);
  for (int k = 0; k < K; ++k) {
    const Unit& u = c.u[k];
    const double local = u.ell * s[k], cube = s[k] * s[k] * s[k];
    if (u.rmin > 0) {
      std::vector<std::pair<int, double>> coef;
      if (ai[k] >= 0) coef.push_back({ai[k], -rate[k]});
      ib[k] = lp.add_linear(coef, local - u.rmin);
    }
    std::vector<std::pair<int, double>> eh{{a0, u.pr - u.pe}};
    if (ai[k] >= 0) eh.push_back({ai[k], e[k]});
    ie[k] = lp.add_linear(eh, -cube);
    std::vector<std::pair<int, double>> epi{{ups, 1.0}, {a0, c.eta_s * u.pr}};
    if (ai[k] >= 0) epi.push_back({ai[k], c.eta_s * e[k] - rate[k]});
    it[k] = lp.add_linear(epi, local - c.eta_s * cube);
  }
  std::vector<std::pair<int, double>> time{{a0, 1.0}};
  for (int k = 0; k < K; ++k)
    if (ai[k] >= 0) time.push_back({ai[k], 1.0});
  const int ib_time = lp.add_linear(time, 1.0);
  lp.add_lower(a0, 0.0, false);
  for (int k = 0; k < K; ++k)
    if (ai[k] >= 0) lp.add_lower(ai[k], 0.0, false);

  Vec x0 = Vec::Zero(n);
  x0(a0) = 0.5;
  for (int k = 0; k < K; ++k)
    if (ai[k] >= 0) x0(ai[k]) = 0.4 / K;
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) worst = std::min(worst, -lp.eval(it[k], x0, nullptr, nullptr));
  x0(ups) = worst - 1.0;

  BarrierResult<double> r;
  try {
    r = barrier_solve(lp, x0);
  } catch (const SolverError&) {
    return std::nullopt;
  }
  InnerSolution out;
  out.eta = c.eta;
  out.Upsilon = c.sc.R0 * r.x(ups);
  out.tau0 = c.sys.T * std::max(0.0, r.x(a0));
  out.tau = out.y = out.P = VectorXd::Zero(K);
  out.f = f;
  out.duals = DualVars::zeros(K);
  for (int k = 0; k < K; ++k) {
    if (ai[k] >= 0) {
      out.tau(k) = c.sys.T * std::max(0.0, r.x(ai[k]));
      if (out.tau(k) > 0) {
        out.P(k) = P(k);
        out.y(k) = out.tau(k) * P(k);
      }
    }
    if (ib[k] >= 0) out.duals.lambda(k) = r.duals(ib[k]);
    out.duals.rho(k) = r.duals(ie[k]) * c.sc.R0 / c.sc.E0;
    out.duals.theta(k) = r.duals(it[k]);
  }
  out.duals.beta = r.duals(ib_time) * c.sc.R0 / c.sys.T;
  return out;
}

// Alternate LP recovery and closed-form responses until the objective settles.
std::optional<InnerSolution> refine(VectorXd f, VectorXd P, const Context& c, int rounds) {
  std::optional<InnerSolution> best;
  for (int i = 0; i < rounds; ++i) {
    auto cur = recover(f, P, c);
    if (!cur) break;
    const bool better = !best || cur->Upsilon > best->Upsilon;
    const double prev = best ? best->Upsilon : -std::numeric_limits<double>::infinity();
    if (better) best = cur;
    if (!better || cur->Upsilon - prev <= 1e-12 * std::max(1.0, std::abs(cur->Upsilon))) break;
    try {
      respond(cur->duals, c, f, P);
    } catch (const SolverError&) {
      break;
    }
  }
  return best;
}

// Coupled responses: f_k and P_k both follow from r_k = (lambda + theta) / (rho + theta eta).
void from_ratio(double r, int k, const Context& c, VectorXd& f, VectorXd& P) {
  const UserParams& u = c.users[k];
  f(k) = std::min(std::sqrt(r / (3.0 * c.sys.C * c.sys.gamma_c)), c.sc.f0 * c.u[k].s_max);
  const double p = u.g > 0 ? r * c.sys.B / (c.sys.zeta * u.v * kLn2) - c.sys.sigma2 / u.g : 0.0;
  P(k) = std::clamp(p, 0.0, c.P_cap);
}

double ratio_of(const InnerSolution& s, int k, const Context& c) {
  if (s.f(k) > 0) return 3.0 * c.sys.C * c.sys.gamma_c * s.f(k) * s.f(k);
  const UserParams& u = c.users[k];
  if (s.P(k) > 0) return (s.P(k) + c.sys.sigma2 / u.g) * c.sys.zeta * u.v * kLn2 / c.sys.B;
  return 3.0 * c.sys.C * c.sys.gamma_c * c.sc.f0 * c.sc.f0 * 1e-6;
}

// Coordinate golden-section search on log r_k, scoring each point by the recovered LP.
InnerSolution polish(InnerSolution best, const Context& c) {
  const int K = static_cast<int>(c.users.size());
  VectorXd lr(K);
  for (int k = 0; k < K; ++k) lr(k) = std::log(ratio_of(best, k, c));
  VectorXd f = best.f, P = best.P;
  for (int k = 0; k < K; ++k) from_ratio(std::exp(lr(k)), k, c, f, P);
  auto score = [&](int k, double v, std::optional<InnerSolution>* keep) {
    VectorXd ff = f, pp = P;
    from_ratio(std::exp(v), k, c, ff, pp);
    auto s = recover(ff, pp, c);
    const double val = s ? s->Upsilon : -std::numeric_limits<double>::infinity();
    if (keep) *keep = std::move(s);
    return val;
  };
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  // Moves along a fixed direction of log r from base; several users binding the minimum
  // together need such joint moves, which a coordinate search cannot make.
  auto along = [&](const VectorXd& base, const VectorXd& dir, double width) {
    auto at = [&](double t, std::optional<InnerSolution>* keep) {
      VectorXd ff = f, pp = P;
      for (int k = 0; k < K; ++k) from_ratio(std::exp(base(k) + t * dir(k)), k, c, ff, pp);
      auto s = recover(ff, pp, c);
      const double val = s ? s->Upsilon : -std::numeric_limits<double>::infinity();
      if (keep) *keep = std::move(s);
      return val;
    };
    double lo = -width, hi = width;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = at(x1, nullptr), f2 = at(x2, nullptr);
    while (hi - lo > 1e-7) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2; x2 = lo + phi * (hi - lo); f2 = at(x2, nullptr);
      } else {
        hi = x2; x2 = x1; f2 = f1; x1 = hi - phi * (hi - lo); f1 = at(x1, nullptr);
      }
    }
    std::optional<InnerSolution> cand;
    const double t = 0.5 * (lo + hi);
    if (at(t, &cand) > best.Upsilon && cand) {
      best = *cand;
      lr = base + t * dir;
      for (int k = 0; k < K; ++k) from_ratio(std::exp(lr(k)), k, c, f, P);
    }
  };
  if (K > 1) {
    along(VectorXd::Constant(K, lr.mean()), VectorXd::Ones(K), std::log(4.0));
    along(lr, VectorXd::Ones(K), std::log(4.0));
  }
  double delta = std::log(4.0);
  for (int sweep = 0; sweep < 40; ++sweep) {
    const double start = best.Upsilon;
    for (int k = 0; k < K; ++k) {
      double lo = lr(k) - delta, hi = lr(k) + delta;
      double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
      double f1 = score(k, x1, nullptr), f2 = score(k, x2, nullptr);
      while (hi - lo > 1e-7) {
        if (f1 < f2) {
          lo = x1; x1 = x2; f1 = f2; x2 = lo + phi * (hi - lo); f2 = score(k, x2, nullptr);
        } else {
          hi = x2; x2 = x1; f2 = f1; x1 = hi - phi * (hi - lo); f1 = score(k, x1, nullptr);
        }
      }
      std::optional<InnerSolution> cand;
      const double v = 0.5 * (lo + hi);
      if (score(k, v, &cand) > best.Upsilon && cand) {
        best = *cand;
        lr(k) = v;
        from_ratio(std::exp(v), k, c, f, P);
      }
    }
    const double gain = best.Upsilon - start;
    if (gain <= 1e-10 * std::max(1.0, std::abs(best.Upsilon))) {
      if (delta < 1e-3) break;
      delta *= 0.25;
    }
  }
  // Joint Nelder-Mead on log r: moves several users at once across max-min kinks.
  auto joint = [&](const VectorXd& v, std::optional<InnerSolution>* keep) {
    VectorXd ff = f, pp = P;
    for (int k = 0; k < K; ++k) from_ratio(std::exp(v(k)), k, c, ff, pp);
    auto s = recover(ff, pp, c);
    const double val = s ? s->Upsilon : -std::numeric_limits<double>::infinity();
    if (keep) *keep = std::move(s);
    return -val;
  };
  if (K > 1) {
    std::vector<VectorXd> simplex(K + 1, lr);
    std::vector<double> val(K + 1);
    for (int k = 0; k < K; ++k) simplex[k + 1](k) += 0.05;
    for (int i = 0; i <= K; ++i) val[i] = joint(simplex[i], nullptr);
    for (int it = 0; it < 400 * K; ++it) {
      std::vector<int> idx(K + 1);
      for (int i = 0; i <= K; ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(), [&](int a, int b) { return val[a] < val[b]; });
      const int lo = idx[0], hi = idx[K], nh = idx[K - 1];
      if (std::abs(val[hi] - val[lo]) <= 1e-12 * std::max(1.0, std::abs(val[lo]))) break;
      VectorXd cen = VectorXd::Zero(K);
      for (int i = 0; i <= K; ++i)
        if (i != hi) cen += simplex[i] / K;
      const VectorXd xr = cen + (cen - simplex[hi]);
      const double fr = joint(xr, nullptr);
      if (fr < val[lo]) {
        const VectorXd xe = cen + 2.0 * (cen - simplex[hi]);
        const double fe = joint(xe, nullptr);
        if (fe < fr) {
          simplex[hi] = xe;
          val[hi] = fe;
        } else {
          simplex[hi] = xr;
          val[hi] = fr;
        }
      } else if (fr < val[nh]) {
        simplex[hi] = xr;
        val[hi] = fr;
      } else {
        const VectorXd xc = cen + 0.5 * (simplex[hi] - cen);
        const double fc = joint(xc, nullptr);
        if (fc < val[hi]) {
          simplex[hi] = xc;
          val[hi] = fc;
        } else {
          for (int i = 0; i <= K; ++i)
            if (i != lo) {
              simplex[i] = simplex[lo] + 0.5 * (simplex[i] - simplex[lo]);
              val[i] = joint(simplex[i], nullptr);
            }
        }
      }
    }
    int arg = 0;
    for (int i = 1; i <= K; ++i)
      if (val[i] < val[arg]) arg = i;
    std::optional<InnerSolution> cand;
    if (-joint(simplex[arg], &cand) > best.Upsilon && cand) best = *cand;
  }
  return best;
}

void project_simplex(VectorXd& v) {
  VectorXd u = v;
  std::sort(u.data(), u.data() + u.size(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    cum += u(i);
    const double t = (cum - 1.0) / (i + 1);
    if (u(i) - t > 0) tau = t;
  }
  v = (v.array() - tau).max(0.0);
}

}  // namespace

DualAscentResult dual_ascent_p3(double eta, const Users& users, const SystemParams& sys,
                                const DualAscentOptions& opt) {
  sys.validate();
  const int K = static_cast<int>(users.size());
  if (K == 0) throw SolverError(ErrorKind::InvalidInput, "no users");
  for (const auto& u : users) u.validate();
  if (eta < 0) throw SolverError(ErrorKind::InvalidInput, "eta must be >= 0");
  const Context c = make_context(eta, users, sys);

  ScaledDuals x;
  x.lambda = VectorXd::Zero(K);
  x.rho = VectorXd::Ones(K);
  x.theta = VectorXd::Constant(K, 1.0 / K);

  DualAscentResult res;
  res.dual_bound = std::numeric_limits<double>::infinity();
  std::optional<InnerSolution> best;
  VectorXd f = VectorXd::Zero(K), P = VectorXd::Zero(K);
  double a = 0.0;

  for (int t = 1; t <= opt.max_steps; ++t) {
    res.steps = t;
    const DualVars d = natural(x, c);
    respond(d, c, f, P);

    // Dual function value and subgradient at x, all in scaled units.
    VectorXd gl(K), gr(K), gt(K);
    double z = -x.beta, D = x.beta, time = 1.0;
    std::vector<double> ak(K, 0.0);
    for (int k = 0; k < K; ++k) {
      const Unit& u = c.u[k];
      z += x.rho(k) * (u.pe - u.pr) - x.theta(k) * c.eta_s * u.pr;
    }
    const double a0 = z > 0 ? 1.0 : 0.0;
    D += a0 * z;
    time -= a0;
    for (int k = 0; k < K; ++k) {
      const Unit& u = c.u[k];
      const double s = f(k) / c.sc.f0;
      const double w = x.lambda(k) + x.theta(k), q = x.rho(k) + x.theta(k) * c.eta_s;
      double rate = 0.0, e = 0.0;
      if (P(k) > 0) {
        rate = u.kappa * std::log2(1.0 + users[k].g * P(k) / sys.sigma2);
        e = sys.zeta * (sys.T * P(k) / c.sc.E0 + u.pc);
        if (w * rate - q * e - x.beta > 0) ak[k] = 1.0;
      }
      D += w * (u.ell * s + ak[k] * rate) - q * (s * s * s + ak[k] * e) - x.beta * ak[k] -
           x.lambda(k) * u.rmin;
      time -= ak[k];
      const double bits = u.ell * s + ak[k] * rate;
      const double energy = u.pr * a0 + ak[k] * e + s * s * s;
      gl(k) = bits - u.rmin;
      gr(k) = u.pe * a0 - energy;
      gt(k) = bits - c.eta_s * energy;
    }
    res.dual_bound = std::min(res.dual_bound, c.sc.R0 * D);

    if (t == 1 || t % opt.recover_every == 0) {
      if (auto cand = refine(f, P, c, 3); cand && (!best || cand->Upsilon > best->Upsilon)) best = cand;
      if (best) {
        res.gap = (res.dual_bound - best->Upsilon) / std::max(1.0, std::abs(best->Upsilon));
        if (res.gap <= opt.gap_tol) break;
      }
    }

    const double norm = std::sqrt(gl.squaredNorm() + gr.squaredNorm() + gt.squaredNorm() + time * time);
    if (t == 1) a = 0.1 / std::max(1.0, norm);
    if (norm == 0) break;
    // Polyak step toward the best primal value once one exists.
    double step = a / std::sqrt(static_cast<double>(t));
    if (best) step = std::max(D - best->Upsilon / c.sc.R0, 1e-3 * step * norm) / (norm * norm);
    x.lambda = (x.lambda - step * gl).cwiseMax(0.0);
    x.rho = (x.rho - step * gr).cwiseMax(0.0);
    x.theta -= step * gt;
    project_simplex(x.theta);
    x.beta = std::max(0.0, x.beta - step * time);
  }

  if (best) {
    if (auto pol = refine(best->f, best->P, c, 200); pol && pol->Upsilon >= best->Upsilon) best = pol;
    best = polish(*best, c);
  }
  if (!best) throw SolverError(ErrorKind::NoFeasiblePoint, "no feasible primal recovered");
  res.primal = *best;
  res.duals = best->duals;
  res.gap = (res.dual_bound - best->Upsilon) / std::max(1.0, std::abs(best->Upsilon));
  res.gap_closed = res.gap <= opt.gap_tol;
  return res;
}

}  // namespace wpmec
