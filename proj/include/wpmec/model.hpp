#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wpmec/errors.hpp"

namespace wpmec {

using Eigen::VectorXd;

inline double dbm_to_watt(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

enum class EhModelKind { NonLinear, LinearBaseline };

struct EhParams {
  double P_max = 0.004927;
  double P0 = 6.4e-5;
  double mu = 274.0;
  double psi = 0.29;
  EhModelKind kind = EhModelKind::NonLinear;
  double efficiency = 0.5;  // LinearBaseline only

  void validate() const;
};

struct SystemParams {
  double T = 1.0;
  double B = 2e6;
  double C = 1e3;
  double gamma_c = 1e-28;
  double sigma2 = 1e-9;
  double zeta = 3.0;
  double P_th = 0.025;
  EhParams eh;
  // Dinkelbach stop: |ratio - eta| <= tol_outer * max(1, eta).
  double tol_outer = 1e-4;
  double tol_sca = 1e-4;
  double tol_alt = 1e-4;
  double tol_dual = 1e-4;
  int max_iters = 30;
  int max_sca_iters = 50;
  int max_alt_iters = 30;

  void validate() const;
};

struct UserParams {
  double h = 0.0;
  double g = 0.0;
  double v = 1.1;
  double P_r = dbm_to_watt(5.0);
  double P_c = dbm_to_watt(5.0);
  double R_min = 1e4;

  void validate() const;
};

using Users = std::vector<UserParams>;

enum class Regime { TdmaPartial, NomaPartial, TdmaBinary, NomaBinary };

inline bool is_noma(Regime r) { return r == Regime::NomaPartial || r == Regime::NomaBinary; }
inline bool is_binary(Regime r) { return r == Regime::TdmaBinary || r == Regime::NomaBinary; }
const char* regime_name(Regime r);
Regime parse_regime(const std::string& name);

struct Allocation {
  double tau0 = 0.0;
  VectorXd tau;       // TDMA: per-user offload time
  double tau1 = 0.0;  // NOMA: shared offload time
  VectorXd P;
  VectorXd f;
  VectorXd alpha;     // binary regimes only; empty means all-ones
  double Ps = 0.0;

  static Allocation zeros(int K, double Ps);
};

struct PerUserMetrics {
  double bits = 0.0;
  double energy = 0.0;
  double ce = 0.0;
};

struct Residual {
  std::string name;
  int user = -1;  // -1 for global constraints
  double value = 0.0;
};

// Harvested power for received RF power rf = h * Ps.
template <typename Scalar>
Scalar harvested_power(const Scalar& rf, const EhParams& eh) {
  using std::exp;
  if (eh.kind == EhModelKind::LinearBaseline) return Scalar(eh.efficiency) * rf;
  const Scalar ea = exp(Scalar(eh.psi) - Scalar(eh.mu) * Scalar(eh.P0));
  const Scalar eb = exp(Scalar(eh.psi) - Scalar(eh.mu) * rf);
  const Scalar p = Scalar(eh.P_max) * ((Scalar(1) + ea) / (Scalar(1) + eb) - Scalar(1)) / ea;
  return p > Scalar(0) ? p : Scalar(0);
}

double harvested_power(const UserParams& u, double Ps, const SystemParams& sys);
double harvested_energy(double tau0, double Ps, const UserParams& u, const SystemParams& sys);

double offload_bits_tdma(double tau_k, double P_k, const UserParams& u, const SystemParams& sys);

// Users must be ordered by nondecreasing g; user k sees interference from users k+1..K-1.
// alpha (optional) scales each interferer's contribution for the binary regime.
double offload_bits_noma(double tau1, const VectorXd& P, int k, const Users& users,
                         const SystemParams& sys, const VectorXd& alpha = VectorXd());
void check_noma_order(const Users& users);

inline double local_bits(double f, const SystemParams& sys) { return sys.T * f / sys.C; }
inline double local_energy(double f, const SystemParams& sys) { return sys.T * sys.gamma_c * f * f * f; }

std::vector<PerUserMetrics> evaluate(const Allocation& a, Regime regime, const Users& users,
                                     const SystemParams& sys);

double min_ce(const std::vector<PerUserMetrics>& m);

std::vector<Residual> feasibility_residuals(const Allocation& a, Regime regime, const Users& users,
                                            const SystemParams& sys);
double max_violation(const std::vector<Residual>& r);

}  // namespace wpmec
