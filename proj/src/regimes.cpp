#include "wpmec/regimes.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>

#include "wpmec/binary.hpp"
#include "wpmec/nomasca.hpp"

namespace wpmec {

namespace {

// Users sorted by nondecreasing g, and the map back to the caller's order.
struct Ordering {
  std::vector<int> perm;  // sorted position -> original index
  Users sorted;
  bool identity = true;
};

Ordering order_by_gain(const Users& users) {
  Ordering o;
  o.perm.resize(users.size());
  std::iota(o.perm.begin(), o.perm.end(), 0);
  std::stable_sort(o.perm.begin(), o.perm.end(), [&](int a, int b) { return users[a].g < users[b].g; });
  for (size_t i = 0; i < o.perm.size(); ++i) {
    o.sorted.push_back(users[o.perm[i]]);
    o.identity = o.identity && o.perm[i] == static_cast<int>(i);
  }
  return o;
}

VectorXd unpermute(const VectorXd& v, const std::vector<int>& perm) {
  if (v.size() != static_cast<Eigen::Index>(perm.size())) return v;
  VectorXd out(v.size());
  for (size_t i = 0; i < perm.size(); ++i) out(perm[i]) = v(i);
  return out;
}

Allocation restore(const Allocation& a, const Ordering& o) {
  if (o.identity) return a;
  Allocation r = a;
  r.tau = unpermute(a.tau, o.perm);
  r.P = unpermute(a.P, o.perm);
  r.f = unpermute(a.f, o.perm);
  r.alpha = unpermute(a.alpha, o.perm);
  return r;
}

// Inverse of restore: the caller's allocation in sorted order.
Allocation to_sorted(const Allocation& a, const Ordering& o) {
  if (o.identity) return a;
  auto pick = [&](const VectorXd& v) {
    if (v.size() != static_cast<Eigen::Index>(o.perm.size())) return v;
    VectorXd out(v.size());
    for (size_t i = 0; i < o.perm.size(); ++i) out(i) = v(o.perm[i]);
    return out;
  };
  Allocation r = a;
  r.tau = pick(a.tau);
  r.P = pick(a.P);
  r.f = pick(a.f);
  r.alpha = pick(a.alpha);
  return r;
}

InnerResult from_solution(const InnerSolution& s, Regime regime, const Users& users, const SystemParams& sys) {
  InnerResult r;
  r.Upsilon = s.Upsilon;
  r.alloc = s.allocation(sys.P_th);
  r.ratio = min_ce(evaluate(r.alloc, regime, users, sys));
  return r;
}

}  // namespace

const char* framework_name(Framework f) { return f == Framework::CE ? "CE" : "CB"; }

ParametricProblem make_problem(Regime regime, const Users& users, const SystemParams& sys) {
  sys.validate();
  if (users.empty()) throw SolverError(ErrorKind::InvalidInput, "no users");
  ParametricProblem p;
  p.regime = regime;

  if (regime == Regime::TdmaPartial) {
    p.residuals = [users, sys](const Allocation& a) {
      return feasibility_residuals(a, Regime::TdmaPartial, users, sys);
    };
    p.solve_inner = [users, sys](double eta) {
      InnerResult r = from_solution(solve_p3(eta, users, sys), Regime::TdmaPartial, users, sys);
      r.trace = {r.Upsilon};
      return r;
    };
    return p;
  }

  const auto order = std::make_shared<Ordering>(order_by_gain(users));
  const Users& inner_users = is_noma(regime) ? order->sorted : users;

  if (regime == Regime::NomaPartial) {
    auto state = std::make_shared<ScaState>();
    auto binary = std::make_shared<BinaryState>();
    p.solve_inner = [order, state, binary, sys](double eta) {
      const Users& us = order->sorted;
      const int K = static_cast<int>(us.size());
      std::optional<InnerSolution> s;
      int steps = 0;
      try {
        s = sca_loop([&](const ScaState& x) { return solve_p9(eta, x, us, sys); }, state.get(), sys);
        steps = s->sca_iterations;
      } catch (const SolverError& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
      }
      // Second start at the best binary allocation. It is feasible here and the surrogate is
      // tight at it, so this run never ends below the binary optimum. Guards against the run
      // above settling at tau1 = 0 when local computing looks better from the default start.
      try {
        const InnerResult b = binary_inner(Regime::NomaBinary, eta, us, sys, binary.get());
        steps += b.iterations;
        ScaState seed = binary->sca;
        const VectorXd& alpha = b.alloc.alpha;
        if (seed.w.size() == K) {
          for (int k = 0; k < K; ++k)
            if (alpha(k) == 0.0) seed.w(k) = 0.0;
          seed.s = VectorXd::Zero(K);
          const InnerSolution t =
              sca_loop([&](const ScaState& x) { return solve_p9(eta, x, us, sys); }, &seed, sys);
          steps += t.sca_iterations;
          if (!s || t.Upsilon > s->Upsilon) {
            s = t;
            *state = seed;
          }
        }
      } catch (const SolverError& e) {
        if (e.kind() != ErrorKind::Infeasible) throw;
      }
      if (!s) throw SolverError(ErrorKind::Infeasible, "no start reaches the minimum bits");
      InnerResult r;
      r.Upsilon = s->Upsilon;
      r.alloc = restore(s->allocation(sys.P_th), *order);
      r.iterations = steps;
      r.trace = state->trace;
      return r;
    };
  } else {
    auto state = std::make_shared<BinaryState>();
    p.solve_inner = [regime, order, state, sys, inner_users](double eta) {
      InnerResult r = binary_inner(regime, eta, inner_users, sys, state.get());
      if (is_noma(regime)) r.alloc = restore(r.alloc, *order);
      return r;
    };
  }
  // Allocations come back in the caller's order; NOMA decoding is checked in sorted order.
  p.residuals = [regime, order, sys](const Allocation& a) {
    return feasibility_residuals(to_sorted(a, *order), regime, order->sorted, sys);
  };
  auto inner = p.solve_inner;
  p.solve_inner = [inner, regime, order, sys](double eta) {
    InnerResult r = inner(eta);
    r.ratio = min_ce(evaluate(to_sorted(r.alloc, *order), regime, order->sorted, sys));
    return r;
  };
  return p;
}

SolveReport solve_regime(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                         double eta0) {
  ParametricProblem p = make_problem(regime, users, sys);
  p.eta0 = eta0;
  return framework == Framework::CE ? dinkelbach(p, sys) : max_min_bits(p, sys);
}

double framework_objective(const SolveReport& r, Regime regime, Framework framework, const Users& users,
                           const SystemParams& sys) {
  if (framework == Framework::CE) return r.eta_star;
  double v = std::numeric_limits<double>::infinity();
  for (const auto& m : regime_metrics(r.alloc, regime, users, sys)) v = std::min(v, m.bits);
  return v;
}

std::vector<PerUserMetrics> regime_metrics(const Allocation& a, Regime regime, const Users& users,
                                           const SystemParams& sys) {
  if (!is_noma(regime)) return evaluate(a, regime, users, sys);
  const Ordering o = order_by_gain(users);
  const auto sorted = evaluate(to_sorted(a, o), regime, o.sorted, sys);
  std::vector<PerUserMetrics> out(sorted.size());
  for (size_t i = 0; i < sorted.size(); ++i) out[o.perm[i]] = sorted[i];
  return out;
}

SolveReport solve_free_ps(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                          int grid) {
  if (grid < 2) throw SolverError(ErrorKind::InvalidInput, "grid needs at least two points");
  const double hi = sys.P_th;
  auto run = [&](double ps, SolveReport* out) {
    SystemParams s = sys;
    s.P_th = ps;
    SolveReport r;
    try {
      r = solve_regime(regime, framework, users, s);
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
      return -std::numeric_limits<double>::infinity();
    }
    r.alloc.Ps = ps;
    const double v = framework_objective(r, regime, framework, users, s);
    if (out) *out = std::move(r);
    return v;
  };
  std::vector<double> ps(grid), val(grid);
  int arg = 0;
  for (int i = 0; i < grid; ++i) {
    // Ps = 0 harvests nothing, so the grid starts one step above it.
    ps[i] = hi * (i + 1) / grid;
    val[i] = run(ps[i], nullptr);
    if (val[i] >= val[arg]) arg = i;
  }
  // Golden-section on the bracket around the best grid point.
  double a = ps[std::max(arg - 1, 0)], b = ps[std::min(arg + 1, grid - 1)];
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = run(c, nullptr), fd = run(d, nullptr);
  for (int it = 0; it < 40 && b - a > 1e-9 * std::max(hi, 1e-12); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = run(c, nullptr);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = run(d, nullptr);
    }
  }
  double best_ps = ps[arg], best = val[arg];
  for (const auto& [x, v] : {std::pair{c, fc}, std::pair{d, fd}})
    if (v > best) {
      best = v;
      best_ps = x;
    }
  SolveReport out;
  if (!std::isfinite(run(best_ps, &out)))
    throw SolverError(ErrorKind::Infeasible, "no transmit power admits a feasible allocation");
  return out;
}

}  // namespace wpmec
