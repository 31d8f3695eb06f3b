#include "wpmec/model.hpp"

#include <algorithm>
#include <limits>

namespace wpmec {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::UnsortedGains: return "UnsortedGains";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::NoStrictlyFeasibleStart: return "NoStrictlyFeasibleStart";
    case ErrorKind::LineSearchStall: return "LineSearchStall";
    case ErrorKind::MaxNewtonIters: return "MaxNewtonIters";
    case ErrorKind::NonConvergent: return "NonConvergent";
    case ErrorKind::InnerSolverFailure: return "InnerSolverFailure";
    case ErrorKind::SubproblemFailure: return "SubproblemFailure";
    case ErrorKind::DegenerateDuals: return "DegenerateDuals";
    case ErrorKind::DegenerateCoefficients: return "DegenerateCoefficients";
    case ErrorKind::PositiveZ: return "PositiveZ";
    case ErrorKind::NegativeZ: return "NegativeZ";
    case ErrorKind::GapNotClosed: return "GapNotClosed";
    case ErrorKind::NoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::NanGuard: return "NanGuard";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw SolverError(ErrorKind::InvalidInput, what);
}

}  // namespace

void EhParams::validate() const {
  require(P_max > 0, "eh.P_max must be > 0");
  require(P0 >= 0, "eh.P0 must be >= 0");
  require(mu > 0, "eh.mu must be > 0");
  require(std::isfinite(psi), "eh.psi must be finite");
  if (kind == EhModelKind::LinearBaseline)
    require(efficiency > 0 && efficiency <= 1, "eh.efficiency must lie in (0, 1]");
}

void SystemParams::validate() const {
  require(T > 0, "T must be > 0");
  require(B > 0, "B must be > 0");
  require(C >= 1, "C must be >= 1");
  require(gamma_c > 0, "gamma_c must be > 0");
  require(sigma2 > 0, "sigma2 must be > 0");
  require(zeta >= 1, "zeta must be >= 1");
  require(P_th > 0, "P_th must be > 0");
  require(tol_outer > 0 && tol_sca > 0 && tol_alt > 0 && tol_dual > 0, "tolerances must be > 0");
  require(max_iters > 0 && max_sca_iters > 0 && max_alt_iters > 0, "iteration caps must be > 0");
  eh.validate();
}

void UserParams::validate() const {
  require(h >= 0, "user h must be >= 0");
  require(g >= 0, "user g must be >= 0");
  require(v > 1, "user v must be > 1");
  require(P_r >= 0, "user P_r must be >= 0");
  require(P_c >= 0, "user P_c must be >= 0");
  require(R_min >= 0, "user R_min must be >= 0");
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::TdmaPartial: return "tdma_partial";
    case Regime::NomaPartial: return "noma_partial";
    case Regime::TdmaBinary: return "tdma_binary";
    case Regime::NomaBinary: return "noma_binary";
  }
  return "?";
}

Regime parse_regime(const std::string& name) {
  for (Regime r : {Regime::TdmaPartial, Regime::NomaPartial, Regime::TdmaBinary, Regime::NomaBinary})
    if (name == regime_name(r)) return r;
  throw SolverError(ErrorKind::InvalidInput, "unknown regime '" + name + "'");
}

Allocation Allocation::zeros(int K, double Ps) {
  Allocation a;
  a.tau = VectorXd::Zero(K);
  a.P = VectorXd::Zero(K);
  a.f = VectorXd::Zero(K);
  a.Ps = Ps;
  return a;
}

double harvested_power(const UserParams& u, double Ps, const SystemParams& sys) {
  return harvested_power(u.h * Ps, sys.eh);
}

double harvested_energy(double tau0, double Ps, const UserParams& u, const SystemParams& sys) {
  return tau0 * harvested_power(u, Ps, sys);
}

double offload_bits_tdma(double tau_k, double P_k, const UserParams& u, const SystemParams& sys) {
  if (tau_k <= 0 || P_k <= 0) return 0.0;
  return sys.B * tau_k / u.v * std::log2(1.0 + u.g * P_k / sys.sigma2);
}

void check_noma_order(const Users& users) {
  for (std::size_t k = 1; k < users.size(); ++k)
    if (users[k].g < users[k - 1].g)
      throw SolverError(ErrorKind::UnsortedGains,
                        "NOMA decoding needs users ordered by nondecreasing uplink gain");
}

double offload_bits_noma(double tau1, const VectorXd& P, int k, const Users& users,
                         const SystemParams& sys, const VectorXd& alpha) {
  check_noma_order(users);
  const int K = static_cast<int>(users.size());
  if (k < 0 || k >= K || P.size() != K) throw SolverError(ErrorKind::InvalidInput, "bad user index");
  if (tau1 <= 0 || P(k) <= 0) return 0.0;
  double interference = 0.0;
  for (int i = k + 1; i < K; ++i) {
    const double w = alpha.size() == K ? alpha(i) : 1.0;
    interference += w * users[i].g * P(i);
  }
  return sys.B * tau1 / users[k].v *
         std::log2(1.0 + users[k].g * P(k) / (interference + sys.sigma2));
}

std::vector<PerUserMetrics> evaluate(const Allocation& a, Regime regime, const Users& users,
                                     const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  if (a.P.size() != K || a.f.size() != K || (!is_noma(regime) && a.tau.size() != K))
    throw SolverError(ErrorKind::InvalidInput, "allocation size does not match user count");
  const bool binary = is_binary(regime);
  VectorXd alpha = VectorXd::Ones(K);
  if (binary && a.alpha.size() == K) alpha = a.alpha;
  if (binary && a.alpha.size() != 0 && a.alpha.size() != K)
    throw SolverError(ErrorKind::InvalidInput, "alpha size does not match user count");

  std::vector<PerUserMetrics> out(K);
  for (int k = 0; k < K; ++k) {
    const UserParams& u = users[k];
    const double wl = binary ? 1.0 - alpha(k) : 1.0;
    const double wo = binary ? alpha(k) : 1.0;
    double off_bits = 0.0, off_time = 0.0;
    if (is_noma(regime)) {
      off_bits = offload_bits_noma(a.tau1, a.P, k, users, sys, binary ? alpha : VectorXd());
      off_time = a.tau1;
    } else {
      off_bits = offload_bits_tdma(a.tau(k), a.P(k), u, sys);
      off_time = a.tau(k);
    }
    PerUserMetrics& m = out[k];
    m.bits = wl * local_bits(a.f(k), sys) + wo * off_bits;
    m.energy = a.tau0 * u.P_r + wo * sys.zeta * off_time * (a.P(k) + u.P_c) +
               wl * local_energy(a.f(k), sys);
    if (m.energy > 0) {
      m.ce = m.bits / m.energy;
    } else if (m.bits > 0) {
      throw SolverError(ErrorKind::NanGuard, "positive bits with zero energy");
    }
  }
  return out;
}

double min_ce(const std::vector<PerUserMetrics>& m) {
  double v = std::numeric_limits<double>::infinity();
  for (const auto& x : m) v = std::min(v, x.ce);
  return m.empty() ? 0.0 : v;
}

std::vector<Residual> feasibility_residuals(const Allocation& a, Regime regime, const Users& users,
                                            const SystemParams& sys) {
  const int K = static_cast<int>(users.size());
  const bool binary = is_binary(regime);
  const bool noma = is_noma(regime);
  std::vector<Residual> r;
  const auto metrics = evaluate(a, regime, users, sys);
  VectorXd alpha = VectorXd::Ones(K);
  if (binary && a.alpha.size() == K) alpha = a.alpha;

  double used_time = a.tau0;
  if (noma) {
    used_time += a.tau1;
    r.push_back({"nonneg_tau1", -1, -a.tau1});
  }
  for (int k = 0; k < K; ++k) {
    const UserParams& u = users[k];
    r.push_back({"min_bits", k, u.R_min - metrics[k].bits});
    r.push_back({"eh_causality", k, metrics[k].energy - harvested_energy(a.tau0, a.Ps, u, sys)});
    r.push_back({"nonneg_P", k, -a.P(k)});
    r.push_back({"nonneg_f", k, -a.f(k)});
    if (!noma) {
      used_time += (binary ? alpha(k) : 1.0) * a.tau(k);
      r.push_back({"nonneg_tau", k, -a.tau(k)});
      r.push_back({"tau_cap", k, a.tau(k) - sys.T});
    }
    if (binary) {
      r.push_back({"alpha_lo", k, -alpha(k)});
      r.push_back({"alpha_hi", k, alpha(k) - 1.0});
    }
  }
  r.push_back({"time_budget", -1, used_time - sys.T});
  r.push_back({"nonneg_tau0", -1, -a.tau0});
  r.push_back({"ps_cap", -1, a.Ps - sys.P_th});
  r.push_back({"nonneg_ps", -1, -a.Ps});
  return r;
}

double max_violation(const std::vector<Residual>& r) {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& x : r) v = std::max(v, x.value);
  return v;
}

}  // namespace wpmec
