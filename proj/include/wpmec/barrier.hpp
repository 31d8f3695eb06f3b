#pragma once

// Small dense log-barrier interior-point method.
//   maximize f0(x)  s.t.  g_i(x) <= 0
// f0 concave, g_i convex, all twice differentiable on their domains.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wpmec/errors.hpp"

namespace wpmec {

template <typename Scalar>
struct ConvexProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  // Value at x; grad/hess, when non-null, arrive zeroed and receive the derivatives.
  // Return a non-finite value outside the function's domain.
  using Function = std::function<Scalar(const Vector&, Vector*, Matrix*)>;

  struct Constraint {
    Function fn;
    std::vector<std::pair<int, Scalar>> coef;  // used when fn is empty
    Scalar rhs = Scalar(0);
    bool domain = false;  // never relaxed by phase I; must hold strictly at the start
    std::string label;
  };

  int n = 0;
  Function objective;
  std::vector<Constraint> constraints;

  explicit ConvexProgram(int dim) : n(dim) {}

  int add(Function g, bool domain = false, std::string label = {}) {
    Constraint c;
    c.fn = std::move(g);
    c.domain = domain;
    c.label = std::move(label);
    constraints.push_back(std::move(c));
    return static_cast<int>(constraints.size()) - 1;
  }

  // sum coef_j x_j <= rhs
  int add_linear(std::vector<std::pair<int, Scalar>> coef, Scalar rhs, bool domain = false,
                 std::string label = {}) {
    Constraint c;
    c.coef = std::move(coef);
    c.rhs = rhs;
    c.domain = domain;
    c.label = std::move(label);
    constraints.push_back(std::move(c));
    return static_cast<int>(constraints.size()) - 1;
  }

  int add_lower(int i, Scalar lo, bool domain = true, std::string label = {}) {
    return add_linear({{i, Scalar(-1)}}, -lo, domain, std::move(label));
  }
  int add_upper(int i, Scalar hi, bool domain = false, std::string label = {}) {
    return add_linear({{i, Scalar(1)}}, hi, domain, std::move(label));
  }

  int size() const { return static_cast<int>(constraints.size()); }

  Scalar eval(int i, const Vector& x, Vector* grad, Matrix* hess) const {
    const Constraint& c = constraints[i];
    if (grad) grad->setZero(n);
    if (hess) hess->setZero(n, n);
    if (c.fn) return c.fn(x, grad, hess);
    Scalar v = -c.rhs;
    for (const auto& [j, a] : c.coef) {
      v += a * x(j);
      if (grad) (*grad)(j) += a;
    }
    return v;
  }
};

template <typename Scalar>
struct BarrierOptions {
  Scalar gap_tol = Scalar(1e-9);
  Scalar newton_tol = Scalar(1e-10);
  Scalar t0 = Scalar(1);
  Scalar mu = Scalar(10);
  Scalar prox = Scalar(1e-12);
  Scalar armijo = Scalar(0.01);
  Scalar backtrack = Scalar(0.5);
  int max_backtrack = 100;
  int max_newton_per_center = 200;
  int max_newton_total = 4000;
};

template <typename Scalar>
struct BarrierResult {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector x;
  Scalar objective = Scalar(0);
  Vector duals;  // lambda_i = 1 / (t * -g_i(x)), one per constraint
  Scalar gap = Scalar(0);
  Scalar kkt_residual = Scalar(0);
  int newton_steps = 0;
  int centering_steps = 0;
  bool phase1 = false;
};

namespace detail {

template <typename Scalar>
struct PathOutcome {
  typename ConvexProgram<Scalar>::Vector x;
  Scalar t = Scalar(0);
  int newton_steps = 0;
  int centering_steps = 0;
  bool stopped_early = false;
};

template <typename Scalar>
bool finite(const Scalar& v) {
  using std::isfinite;
  return isfinite(v);
}

// Barrier value  -t (f0 - prox|x|^2) - sum log(-g_i); +inf outside the domain.
template <typename Scalar>
Scalar barrier_value(const ConvexProgram<Scalar>& p, const typename ConvexProgram<Scalar>::Vector& x,
                     Scalar t, Scalar prox) {
  using std::log;
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  Scalar phi = Scalar(0);
  for (int i = 0; i < p.size(); ++i) {
    const Scalar g = p.eval(i, x, nullptr, nullptr);
    if (!finite(g) || !(g < Scalar(0))) return inf;
    phi -= log(-g);
  }
  const Scalar f = p.objective(x, nullptr, nullptr);
  if (!finite(f)) return inf;
  return phi - t * (f - prox * x.squaredNorm());
}

// Newton direction for the barrier function at (x, t); grad receives its gradient.
template <typename Scalar>
typename ConvexProgram<Scalar>::Vector newton_direction(const ConvexProgram<Scalar>& p,
                                                        const typename ConvexProgram<Scalar>::Vector& x,
                                                        Scalar t, const BarrierOptions<Scalar>& opt,
                                                        typename ConvexProgram<Scalar>::Vector& grad) {
  using Vector = typename ConvexProgram<Scalar>::Vector;
  using Matrix = typename ConvexProgram<Scalar>::Matrix;
  const int n = p.n;
  Vector gi = Vector::Zero(n);
  Matrix Hi = Matrix::Zero(n, n);
  Matrix hess(n, n);
  const Scalar f = p.objective(x, &gi, &Hi);
  if (!finite(f)) throw SolverError(ErrorKind::LineSearchStall, "objective left its domain");
  grad = -t * (gi - Scalar(2) * opt.prox * x);
  hess = -t * Hi;
  hess.diagonal().array() += t * Scalar(2) * opt.prox;
  for (int i = 0; i < p.size(); ++i) {
    const Scalar g = p.eval(i, x, &gi, p.constraints[i].fn ? &Hi : nullptr);
    const Scalar s = -g;
    grad += gi / s;
    if (p.constraints[i].fn) hess += Hi / s;
    hess.noalias() += gi * gi.transpose() / (s * s);
  }
  hess = Scalar(0.5) * (hess + hess.transpose()).eval();

  Vector dx;
  Scalar reg = Scalar(0);
  const Scalar diag_scale = hess.diagonal().cwiseAbs().maxCoeff();
  for (int attempt = 0; attempt < 12; ++attempt) {
    Matrix H = hess;
    if (reg > Scalar(0)) H.diagonal().array() += reg;
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() == Eigen::Success) {
      dx = ldlt.solve(-grad);
      if (dx.allFinite() && grad.dot(dx) < Scalar(0)) return dx;
      if (dx.allFinite() && grad.dot(dx) == Scalar(0)) return dx;
    }
    reg = reg > Scalar(0) ? reg * Scalar(100) : diag_scale * Scalar(1e-14) + Scalar(1e-300);
  }
  throw SolverError(ErrorKind::LineSearchStall, "Newton system singular");
}

template <typename Scalar>
PathOutcome<Scalar> central_path(
    const ConvexProgram<Scalar>& p, typename ConvexProgram<Scalar>::Vector x,
    const BarrierOptions<Scalar>& opt,
    const std::function<bool(const typename ConvexProgram<Scalar>::Vector&, Scalar, bool)>& stop) {
  using Vector = typename ConvexProgram<Scalar>::Vector;
  using std::abs;
  const int n = p.n;
  const Scalar m = Scalar(std::max(1, p.size()));
  PathOutcome<Scalar> out;
  Scalar t = opt.t0;
  Vector grad(n);

  for (;;) {
    int inner = 0;
    for (;;) {
      Vector dx = newton_direction(p, x, t, opt, grad);
      const Scalar decrement = -grad.dot(dx);
      const Scalar phi0 = barrier_value(p, x, t, opt.prox);
      const Scalar floor = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + abs(phi0));
      if (decrement / Scalar(2) <= std::max(opt.newton_tol, floor)) break;
      Scalar step = Scalar(1);
      Vector trial;
      bool accepted = false;
      for (int b = 0; b < opt.max_backtrack; ++b) {
        trial = x + step * dx;
        const Scalar phi = barrier_value(p, trial, t, opt.prox);
        if (finite(phi) && phi <= phi0 - opt.armijo * step * decrement) {
          accepted = true;
          break;
        }
        step *= opt.backtrack;
      }
      if (!accepted) {
        // Roundoff floor: the remaining decrease is below what double arithmetic resolves.
        if (decrement < Scalar(1e-6) * (Scalar(1) + abs(phi0))) break;
        throw SolverError(ErrorKind::LineSearchStall, "backtracking failed to decrease the barrier");
      }
      // Converged to roundoff when the accepted move no longer changes x meaningfully.
      const Scalar moved = (step * dx).template lpNorm<Eigen::Infinity>();
      if (trial == x || moved <= Scalar(1e-14) * (Scalar(1) + x.template lpNorm<Eigen::Infinity>())) break;
      x = trial;
      // Same floor when only a sliver of the step survives backtracking.
      if (step < Scalar(1e-4) && decrement < Scalar(1e-6) * (Scalar(1) + abs(phi0))) break;
      ++out.newton_steps;
      ++inner;
      if (stop && stop(x, t, false)) {
        out.x = x;
        out.t = t;
        out.stopped_early = true;
        return out;
      }
      if (inner >= opt.max_newton_per_center || out.newton_steps >= opt.max_newton_total)
        throw SolverError(ErrorKind::MaxNewtonIters, "centering did not converge");
    }
    ++out.centering_steps;
    if (stop && stop(x, t, true)) {
      out.x = x;
      out.t = t;
      out.stopped_early = true;
      return out;
    }
    if (m / t <= opt.gap_tol) break;
    t *= opt.mu;
  }
  out.x = x;
  out.t = t;
  return out;
}

}  // namespace detail

template <typename Scalar>
BarrierResult<Scalar> barrier_solve(const ConvexProgram<Scalar>& prog,
                                    const typename ConvexProgram<Scalar>::Vector& x0,
                                    const BarrierOptions<Scalar>& opt = {}) {
  using Vector = typename ConvexProgram<Scalar>::Vector;
  using Matrix = typename ConvexProgram<Scalar>::Matrix;
  using Program = ConvexProgram<Scalar>;
  using std::abs;
  using std::max;
  const int n = prog.n;
  if (x0.size() != n) throw SolverError(ErrorKind::InvalidInput, "start point has wrong dimension");

  Scalar worst = -std::numeric_limits<Scalar>::infinity();
  for (int i = 0; i < prog.size(); ++i) {
    const Scalar g = prog.eval(i, x0, nullptr, nullptr);
    if (prog.constraints[i].domain) {
      if (!detail::finite(g) || !(g < Scalar(0)))
        throw SolverError(ErrorKind::NoStrictlyFeasibleStart,
                          "domain constraint '" + prog.constraints[i].label + "' violated at start");
    } else {
      if (!detail::finite(g))
        throw SolverError(ErrorKind::NoStrictlyFeasibleStart,
                          "constraint '" + prog.constraints[i].label + "' undefined at start");
      worst = max(worst, g);
    }
  }
  if (!detail::finite(prog.objective(x0, nullptr, nullptr)))
    throw SolverError(ErrorKind::NoStrictlyFeasibleStart, "objective undefined at start");

  BarrierResult<Scalar> res;
  Vector x = x0;

  if (!(worst < Scalar(0))) {
    // Phase I: minimise s subject to g_i(x) <= s over relaxable constraints, inside a
    // generous box around x0 so that the auxiliary problem stays bounded.
    res.phase1 = true;
    Program aux(n + 1);
    const int si = n;
    aux.objective = [si](const Vector& z, Vector* g, Matrix*) {
      if (g) (*g)(si) = Scalar(-1);
      return -z(si);
    };
    for (int i = 0; i < prog.size(); ++i) {
      const auto& c = prog.constraints[i];
      if (c.domain) {
        if (c.fn) {
          aux.add(
              [&prog, i, n](const Vector& z, Vector* g, Matrix* H) {
                Vector gx;
                Matrix Hx;
                const Scalar v = prog.eval(i, z.head(n), g ? &gx : nullptr, H ? &Hx : nullptr);
                if (g) g->head(n) = gx;
                if (H) H->topLeftCorner(n, n) = Hx;
                return v;
              },
              true, c.label);
        } else {
          aux.add_linear(c.coef, c.rhs, true, c.label);
        }
      } else if (c.fn) {
        aux.add(
            [&prog, i, n, si](const Vector& z, Vector* g, Matrix* H) {
              Vector gx;
              Matrix Hx;
              const Scalar v = prog.eval(i, z.head(n), g ? &gx : nullptr, H ? &Hx : nullptr);
              if (g) {
                g->head(n) = gx;
                (*g)(si) = Scalar(-1);
              }
              if (H) H->topLeftCorner(n, n) = Hx;
              return v - z(si);
            },
            false, c.label);
      } else {
        auto coef = c.coef;
        coef.push_back({si, Scalar(-1)});
        aux.add_linear(std::move(coef), c.rhs, false, c.label);
      }
    }
    for (int j = 0; j < n; ++j) {
      const Scalar r = Scalar(1e3) * max(Scalar(1), abs(x0(j)));
      aux.add_lower(j, x0(j) - r, true, "phase1_box");
      aux.add_upper(j, x0(j) + r, true, "phase1_box");
    }
    const Scalar s_floor = Scalar(-1);
    aux.add_lower(si, s_floor, true, "phase1_floor");

    Vector z(n + 1);
    z.head(n) = x0;
    z(si) = worst + max(Scalar(1), abs(worst));

    const Scalar m_aux = Scalar(aux.size());
    bool infeasible = false;
    Scalar certificate = Scalar(0);
    auto stop = [&](const Vector& zz, Scalar t, bool centered) {
      if (zz(si) < Scalar(0)) {
        for (int i = 0; i < prog.size(); ++i)
          if (!prog.constraints[i].domain && !(prog.eval(i, zz.head(n), nullptr, nullptr) < Scalar(0)))
            return false;
        return true;
      }
      // duality bound on the auxiliary optimum is valid only on the central path
      if (centered && zz(si) - m_aux / t > Scalar(0) && m_aux / t <= Scalar(1e-4) * zz(si)) {
        infeasible = true;
        certificate = zz(si);
        return true;
      }
      return false;
    };
    BarrierOptions<Scalar> o1 = opt;
    o1.prox = Scalar(0);
    o1.gap_tol = Scalar(1e-13);
    auto path = detail::central_path(aux, z, o1, std::function<bool(const Vector&, Scalar, bool)>(stop));
    res.newton_steps += path.newton_steps;
    if (infeasible || !path.stopped_early) {
      if (!infeasible) certificate = max(path.x(si), Scalar(0));
      throw SolverError(ErrorKind::Infeasible, "no strictly feasible point exists",
                        static_cast<double>(certificate));
    }
    x = path.x.head(n);
  }

  auto path = detail::central_path(prog, x, opt, {});
  res.x = path.x;
  res.newton_steps += path.newton_steps;
  res.centering_steps = path.centering_steps;
  const Scalar t = path.t;

  Vector grad(n), gi(n);
  Matrix Hi = Matrix::Zero(n, n);
  grad.setZero();
  res.objective = prog.objective(res.x, &grad, &Hi);
  // First-order corrected multipliers: lambda_i = (1 + grad g_i . dx / s_i) / (t s_i), using the
  // pending Newton step so that an imperfectly centred final iterate still yields sharp duals.
  Vector gphi(n);
  const Vector dx = detail::newton_direction(prog, res.x, t, opt, gphi);
  res.duals.resize(prog.size());
  for (int i = 0; i < prog.size(); ++i) {
    const Scalar s = -prog.eval(i, res.x, &gi, nullptr);
    res.duals(i) = max(Scalar(0), (Scalar(1) + gi.dot(dx) / s) / (t * s));
    grad -= res.duals(i) * gi;
  }
  res.kkt_residual = grad.cwiseAbs().maxCoeff();
  res.gap = Scalar(prog.size()) / t;
  return res;
}

}  // namespace wpmec
