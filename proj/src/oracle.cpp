#include "wpmec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wpmec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Caps sit just inside the energy budget so rounding never tips a point over it.
constexpr double kInside = 1.0 - 1e-12;

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) v[i] = std::exp(a + (b - a) * i / (n - 1));
  v.back() = hi;
  return v;
}

struct Pick {
  double value = -kInf;
  double P = 0.0;
  double f = 0.0;
};

// Points per axis inside a zoom window; odd so the window's center is a grid point.
constexpr int kZoomPoints = 13;

// Axis lists of one search. A zero span means the full coarse range; otherwise a log window
// of that factor around the incumbent, clipped to the axis bounds.
struct Window {
  const Allocation* center = nullptr;
  double time_span = 0.0;
  double power_span = 0.0;
};

struct Search {
  Regime regime;
  Framework fw;
  const Users& users;
  const SystemParams& sys;
  const GridSpec& grid;
  VectorXd alpha;  // ones for partial regimes

  double wo(int k) const { return alpha(k); }
  double wl(int k) const { return is_binary(regime) ? 1.0 - alpha(k) : 1.0; }

  double value(int k, double bits, double energy, double harvest) const {
    if (energy > harvest || bits < users[k].R_min) return -kInf;
    if (fw == Framework::CB) return bits;
    return energy > 0 ? bits / energy : 0.0;
  }

  // Window of kZoomPoints around c, below hi; hi itself is always a candidate.
  static std::vector<double> around(double c, double span, double hi) {
    std::vector<double> v;
    for (double x : logspace(c / span, c * span, kZoomPoints))
      if (x < hi) v.push_back(x);
    v.push_back(hi);
    return v;
  }

  std::vector<double> times(double lo, double c, double span) const {
    std::vector<double> v{0.0};
    if (span == 0.0) {
      // Log-spaced from both ends, since the harvest slot often takes nearly all of T.
      for (double t : logspace(lo * sys.T, sys.T, grid.time)) {
        v.push_back(t);
        if (t < sys.T) v.push_back(sys.T - t);
      }
    } else if (c > 0) {
      for (double t : logspace(c / span, std::min(c * span, sys.T), kZoomPoints)) v.push_back(t);
      v.push_back(c);
    }
    return v;
  }

  // Transmit powers affordable with cap; NOMA also tries zero since the slot is paid anyway.
  std::vector<double> powers(double cap, double c, double span) const {
    std::vector<double> v;
    if (is_noma(regime)) v.push_back(0.0);
    if (!(cap > 0)) return v.empty() ? std::vector<double>{0.0} : v;
    const auto add = span > 0 && c > 0 ? around(c, span, cap) : logspace(cap * 1e-6, cap, grid.power);
    v.insert(v.end(), add.begin(), add.end());
    return v;
  }

  std::vector<double> freqs(double cap, double c, double span) const {
    std::vector<double> v{0.0};
    if (!(cap > 0)) return v;
    const auto add = span > 0 && c > 0 ? around(c, span, cap) : logspace(cap * 1e-4, cap, grid.freq);
    v.insert(v.end(), add.begin(), add.end());
    return v;
  }

  double power_cap(int k, double tau0, double toff) const {
    const UserParams& u = users[k];
    const double spare = harvested_energy(tau0, sys.P_th, u, sys) - tau0 * u.P_r;
    if (wo(k) == 0.0 || toff <= 0.0 || spare <= 0) return 0.0;
    return std::max(0.0, (spare / (sys.zeta * toff) - u.P_c) * kInside);
  }

  // Best (P, f) of user k for a time split. interference < 0 selects TDMA rates.
  // fixed_P, when non-negative, pins the transmit power.
  Pick best_user(int k, double tau0, double toff, double interference, const Window& w,
                 double fixed_P = -1.0) const {
    const UserParams& u = users[k];
    const double harvest = harvested_energy(tau0, sys.P_th, u, sys);
    const double spare = harvest - tau0 * u.P_r;
    const bool noma = is_noma(regime);
    Pick best;
    if (spare < 0) return best;

    const double Pc = w.center ? w.center->P(k) : 0.0, fc = w.center ? w.center->f(k) : 0.0;
    std::vector<double> ps{0.0};
    if (fixed_P >= 0)
      ps = {fixed_P};
    else if (wo(k) > 0 && toff > 0)
      ps = powers(power_cap(k, tau0, toff), Pc, w.power_span);
    for (double P : ps) {
      // NOMA charges the shared slot's circuit power to every offloading user.
      const bool pays = noma ? toff > 0 : P > 0;
      const double off_energy = pays ? wo(k) * sys.zeta * toff * (P + u.P_c) : 0.0;
      double off_bits = 0.0;
      if (P > 0 && toff > 0) {
        off_bits = interference < 0
                       ? offload_bits_tdma(toff, P, u, sys)
                       : sys.B * toff / u.v * std::log2(1.0 + u.g * P / (interference + sys.sigma2));
      }
      const double rest = spare - off_energy;
      const double fcap = wl(k) > 0 && rest > 0 ? std::cbrt(rest / (sys.T * sys.gamma_c)) * kInside : 0.0;
      for (double f : freqs(fcap, fc, w.power_span)) {
        const double bits = wl(k) * local_bits(f, sys) + wo(k) * off_bits;
        const double energy = tau0 * u.P_r + off_energy + wl(k) * local_energy(f, sys);
        const double v = value(k, bits, energy, harvest);
        if (v > best.value) best = {v, P, f};
      }
    }
    return best;
  }

  Allocation make(double tau0, const std::vector<double>& toff, const std::vector<Pick>& picks) const {
    const int K = static_cast<int>(users.size());
    Allocation a = Allocation::zeros(K, sys.P_th);
    a.tau0 = tau0;
    if (is_noma(regime)) {
      a.tau1 = toff[0];
    } else {
      for (int k = 0; k < K; ++k) a.tau(k) = toff[k];
    }
    for (int k = 0; k < K; ++k) {
      a.P(k) = picks[k].P;
      a.f(k) = picks[k].f;
    }
    if (is_binary(regime)) a.alpha = alpha;
    return a;
  }

  // The model's own verdict, so the oracle never reports an infeasible point.
  double score(const Allocation& a) const {
    for (const auto& r : feasibility_residuals(a, regime, users, sys))
      if (r.value > 0) return -kInf;
    double v = kInf;
    for (const auto& m : evaluate(a, regime, users, sys)) v = std::min(v, fw == Framework::CE ? m.ce : m.bits);
    return v;
  }

  OracleResult search(const Window& w) const {
    const int K = static_cast<int>(users.size());
    const Allocation* c = w.center;
    const auto t0 = times(1e-8, c ? c->tau0 : 0.0, w.time_span);

    OracleResult best;
    best.objective = -kInf;
    auto consider = [&](double v, double tau0, const std::vector<double>& ts, const std::vector<Pick>& picks) {
      if (!(v > best.objective)) return;
      const Allocation a = make(tau0, ts, picks);
      const double checked = score(a);
      if (checked > best.objective) {
        best.objective = checked;
        best.alloc = a;
      }
    };

    for (double tau0 : t0) {
      if (!is_noma(regime)) {
        // Per-user tables over the user's own slot, joined under the time budget.
        std::vector<std::vector<double>> toff(K);
        std::vector<std::vector<Pick>> table(K);
        for (int k = 0; k < K; ++k) {
          toff[k] = wo(k) > 0 ? times(1e-5, c ? c->tau(k) : 0.0, w.time_span) : std::vector<double>{0.0};
          table[k].resize(toff[k].size());
          for (size_t j = 0; j < toff[k].size(); ++j)
            if (tau0 + toff[k][j] <= sys.T) table[k][j] = best_user(k, tau0, toff[k][j], -1.0, w);
        }
        if (K == 1) {
          for (size_t j = 0; j < toff[0].size(); ++j) consider(table[0][j].value, tau0, {toff[0][j]}, {table[0][j]});
          continue;
        }
        for (size_t i = 0; i < toff[0].size(); ++i)
          for (size_t j = 0; j < toff[1].size(); ++j) {
            if (tau0 + toff[0][i] + toff[1][j] > sys.T) continue;
            consider(std::min(table[0][i].value, table[1][j].value), tau0, {toff[0][i], toff[1][j]},
                     {table[0][i], table[1][j]});
          }
        continue;
      }
      for (double tau1 : times(1e-5, c ? c->tau1 : 0.0, w.time_span)) {
        if (tau0 + tau1 > sys.T) continue;
        if (K == 1) {
          const Pick p = best_user(0, tau0, tau1, 0.0, w);
          consider(p.value, tau0, {tau1}, {p});
          continue;
        }
        // The stronger user is decoded last and sees no interference; scan its power and
        // give the weaker user its best response.
        std::vector<double> top{0.0};
        if (wo(1) > 0 && tau1 > 0) top = powers(power_cap(1, tau0, tau1), c ? c->P(1) : 0.0, w.power_span);
        for (double P1 : top) {
          const Pick p1 = best_user(1, tau0, tau1, 0.0, w, P1);
          if (!(p1.value > -kInf)) continue;
          const Pick p0 = best_user(0, tau0, tau1, wo(1) * users[1].g * P1, w);
          consider(std::min(p0.value, p1.value), tau0, {tau1}, {p0, p1});
        }
      }
    }
    return best;
  }

  // Coarse search, then windows around the incumbent whose log width halves ten times.
  OracleResult run() const {
    OracleResult best = search(Window{});
    if (!(best.objective > -kInf)) throw SolverError(ErrorKind::NoFeasiblePoint, "no grid point is feasible");
    auto ratio = [](double decades, int n) { return std::pow(10.0, decades / (n - 1)); };
    double ts = std::pow(ratio(5.0, grid.time), 2.0);
    double ps = std::pow(std::max(ratio(6.0, grid.power), ratio(4.0, grid.freq)), 2.0);
    auto step = [&](double time_span, double power_span) {
      const Allocation center = best.alloc;
      const OracleResult r = search(Window{&center, time_span, power_span});
      if (r.objective > best.objective) best = r;
    };
    for (int level = 0; level < 10; ++level) {
      const double ts_next = std::sqrt(ts), ps_next = std::sqrt(ps);
      if (grid.order == RefineOrder::TimeFirst) {
        step(ts_next, ps);
        step(ts_next, ps_next);
      } else {
        step(ts, ps_next);
        step(ts_next, ps_next);
      }
      ts = ts_next;
      ps = ps_next;
    }
    return best;
  }
};

}  // namespace

OracleResult grid_maxmin(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                         const GridSpec& grid, const VectorXd& alpha) {
  sys.validate();
  const int K = static_cast<int>(users.size());
  if (K < 1 || K > 2) throw SolverError(ErrorKind::InvalidInput, "the grid oracle handles one or two users");
  for (int n : {grid.time, grid.power, grid.freq})
    if (n < 2 || n > 64) throw SolverError(ErrorKind::InvalidInput, "grid sizes must lie in [2, 64]");
  for (const auto& u : users) u.validate();
  if (is_noma(regime)) check_noma_order(users);

  if (is_binary(regime) && alpha.size() == 0) {
    const ModeSearch m = enumerate_modes(K, [&](const VectorXd& a) {
      return grid_maxmin(regime, framework, users, sys, grid, a).objective;
    });
    return grid_maxmin(regime, framework, users, sys, grid, m.alpha);
  }
  Search s{regime, framework, users, sys, grid, VectorXd::Ones(K)};
  if (is_binary(regime)) {
    if (alpha.size() != K || ((alpha.array() != 0.0) && (alpha.array() != 1.0)).any())
      throw SolverError(ErrorKind::InvalidInput, "alpha must be a 0/1 vector of length K");
    s.alpha = alpha;
  }
  return s.run();
}

ModeSearch enumerate_modes(int K, const std::function<double(const VectorXd&)>& objective) {
  if (K < 1 || K > 8) throw SolverError(ErrorKind::InvalidInput, "mode enumeration handles 1 to 8 users");
  ModeSearch best;
  best.objective = -kInf;
  for (int mask = 0; mask < (1 << K); ++mask) {
    VectorXd a(K);
    for (int k = 0; k < K; ++k) a(k) = (mask >> k) & 1;
    double v;
    try {
      v = objective(a);
    } catch (const SolverError& e) {
      if (e.kind() != ErrorKind::Infeasible && e.kind() != ErrorKind::NoFeasiblePoint) throw;
      continue;
    }
    if (v > best.objective) {
      best.objective = v;
      best.alpha = a;
    }
  }
  if (best.alpha.size() == 0) throw SolverError(ErrorKind::NoFeasiblePoint, "every mode vector is infeasible");
  return best;
}

}  // namespace wpmec
