#pragma once

#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "wpmec/convex.hpp"

namespace wpmec {

// Linearization point and last iterate of the NOMA successive convex approximation.
// Internal units: a = tau/T, w = zeta tau1 P / E0, s = f / f0.
struct ScaState {
  double a0 = 0.5;
  double a1 = 0.0;  // shared offload time
  VectorXd w;       // transmit energy per user
  VectorXd s;       // CPU frequency per user
  int j = 0;
  std::vector<double> trace;  // Upsilon per step
  // Surrogate optimum with the offload slot open; it keeps rising while the local-only
  // candidate wins, so the loop watches both.
  double surrogate = std::numeric_limits<double>::quiet_NaN();
  bool initialized = false;
};

// Start point: tau0 = T/2, tau1 up to 0.4T with a quarter of each net harvest on circuit power,
// another quarter on transmit energy and a tenth on local computing.
ScaState sca_init(const VectorXd& alpha, const Users& users, const SystemParams& sys);

// One convexified step of the partial (solve_p9) or relaxed-binary (solve_p11) NOMA inner problem.
// Offload bits of user k are kappa [Phi(tau1, S_k) - Phi(tau1, I_k)] with Phi(t, u) = t log2(1 + u/t),
// S_k = I_k + g_k y_k and I_k = sum_{i>k} alpha_i g_i y_i. The second term is replaced by its tangent
// at the state, so the surrogate never overstates the bits and the previous iterate stays feasible.
std::pair<InnerSolution, ScaState> solve_p9(double eta, const ScaState& state, const Users& users,
                                            const SystemParams& sys);
std::pair<InnerSolution, ScaState> solve_p11(double eta, const VectorXd& alpha, const ScaState& state,
                                             const Users& users, const SystemParams& sys);

using ScaStep = std::function<std::pair<InnerSolution, ScaState>(const ScaState&)>;

// Repeat steps until |Upsilon_j - Upsilon_{j-1}| <= tol_sca * max(1, |Upsilon_j|) or max_sca_iters.
// On return *state holds the final linearization point, usable as a warm start.
InnerSolution sca_loop(const ScaStep& step, ScaState* state, const SystemParams& sys);

}  // namespace wpmec
