#pragma once

#include <Eigen/Dense>

#include "wpmec/model.hpp"

namespace wpmec {

// Lagrange multipliers in natural units (Upsilon measured in bits).
// TDMA partial: lambda (min bits), rho (EH causality), theta (epigraph), beta (time budget).
// Binary extras: mu (EH), chi (epigraph), upsilon (time); varpi/omega for the NOMA inner problem.
struct DualVars {
  VectorXd lambda, rho, theta;
  double beta = 0.0;
  VectorXd mu, chi;
  double upsilon = 0.0;
  VectorXd varpi, omega;

  static DualVars zeros(int K);
};

struct InnerSolution {
  double eta = 0.0;
  double Upsilon = 0.0;
  double tau0 = 0.0;
  VectorXd tau;       // TDMA offload times
  double tau1 = 0.0;  // NOMA shared offload time
  VectorXd y;         // y_k = tau_k * P_k (TDMA)
  VectorXd P, f;
  VectorXd alpha;     // fixed mode vector for binary inner problems
  DualVars duals;
  double kkt_residual = 0.0;
  int newton_steps = 0;
  int sca_iterations = 0;  // NOMA only

  Allocation allocation(double Ps) const;
};

// Reference scales used to keep the inner programs well conditioned.
struct Scales {
  double E0 = 1.0;  // J
  double f0 = 1.0;  // Hz
  double R0 = 1.0;  // bits
};
Scales inner_scales(const Users& users, const SystemParams& sys);

// tau * log2(1 + c w / tau) scaled by kappa, with derivatives. Returns 0 at tau = w = 0.
struct PerspectiveRate {
  double value;
  Eigen::Vector2d grad;      // d/dtau, d/dw
  Eigen::Matrix2d hess;
};
PerspectiveRate perspective_rate(double tau, double w, double kappa, double c);

InnerSolution solve_p3(double eta, const Users& users, const SystemParams& sys);
InnerSolution solve_p6(double eta, const VectorXd& alpha, const Users& users, const SystemParams& sys);

}  // namespace wpmec
