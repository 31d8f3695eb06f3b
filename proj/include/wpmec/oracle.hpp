#pragma once

#include <functional>

#include "wpmec/regimes.hpp"

namespace wpmec {

// Which axes each zoom level narrows first.
enum class RefineOrder { TimeFirst, PowerFirst };

// Points per axis. Times and powers are log-spaced (plus zero where zero is meaningful).
struct GridSpec {
  int time = 32;
  int power = 32;
  int freq = 32;
  RefineOrder order = RefineOrder::TimeFirst;
};

struct OracleResult {
  Allocation alloc;
  double objective = 0.0;
};

// Brute-force max-min CE (or min bits for CB) for K <= 2 at Ps = P_th. Each user's best
// (P, f) is tabulated per time split and the splits are combined under the time budget. The
// search then repeats on log windows around the incumbent, the window width halving ten times. Binary regimes take alpha
// in {0,1}^K; an empty alpha searches all mode vectors. NOMA users must be ordered by g.
// Throws NoFeasiblePoint when no grid point meets every constraint.
OracleResult grid_maxmin(Regime regime, Framework framework, const Users& users, const SystemParams& sys,
                         const GridSpec& grid = {}, const VectorXd& alpha = VectorXd());

struct ModeSearch {
  VectorXd alpha;
  double objective = 0.0;
};

// Best of all 2^K mode vectors under the supplied objective, K <= 8. A mode whose objective
// throws Infeasible is skipped; other errors propagate. Ties keep the first vector in binary
// counting order. Throws NoFeasiblePoint when every mode is infeasible.
ModeSearch enumerate_modes(int K, const std::function<double(const VectorXd&)>& objective);

}  // namespace wpmec
