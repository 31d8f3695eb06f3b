#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wpmec/regimes.hpp"

namespace wpmec {

// Stand-in channel model: distance uniform in [d_min, d_max] m, power gain d^-exponent times an
// exponential Rayleigh fade, drawn independently for downlink and uplink.
struct ChannelModel {
  int K = 5;
  double d_min = 1.0;
  double d_max = 5.0;
  double exponent = 2.5;
};

// Users drawn from the channel model. Every non-gain field is copied from base.
Users draw_users(const ChannelModel& model, const UserParams& base, std::uint64_t seed);

// Five users with the default constants and fixed gains spread from a cell-edge uplink (g = 1e-8)
// to a strong one (g = 0.1). The channel model leaves most users below their circuit power at
// these transmit powers, so the reference scenario uses explicit gains.
Users default_users();

// 0.005 to 0.04 W in steps of 0.005 W.
std::vector<double> default_sweep();

struct Config {
  SystemParams sys;
  Users users;
  std::optional<ChannelModel> channel;  // set when users were drawn
  std::vector<double> ps;
  std::vector<Regime> regimes{Regime::TdmaPartial, Regime::NomaPartial, Regime::TdmaBinary, Regime::NomaBinary};
  std::vector<Framework> frameworks{Framework::CE, Framework::CB};
  std::uint64_t seed = 1;
};

Config default_config();

// JSON with top-level sections system, users, sweep, regimes, frameworks and seed. users is
// either a list of explicit users or {"model": "distance", ...}; a seed, from the file or from
// seed_override, is then mandatory. seed_override wins over the file's seed.
// Throws SolverError(ConfigError) carrying the line and column or the offending key.
Config parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = std::nullopt);

// Resolved config with explicit gains. Parsing it reproduces the run.
std::string manifest_json(const Config& config);

// Jain's index (sum x)^2 / (K sum x^2) in [1/K, 1]. Throws AllZero when every entry is 0.
double fairness_index(const VectorXd& ce);

struct SweepRow {
  double Ps = 0.0;
  Regime regime = Regime::TdmaPartial;
  bool solved = false;    // metric columns are empty when false
  double eta_star = 0.0;  // min_k CE of the returned allocation
  double min_bits = 0.0;
  double sum_bits = 0.0;
  double sum_energy = 0.0;
  std::optional<double> jain;  // empty when every user's CE is zero
  int outer_iters = 0;
  int inner_iters = 0;
  std::string status = "ok";
  bool hard_failure = false;  // a solver error other than infeasibility
  std::vector<double> eta_trace;
  Allocation alloc;
};

// Every (Ps, regime) point of one framework, sorted by (Ps, regime). Failures are recorded in
// the row's status and the sweep continues. Points run on up to `parallel` threads.
std::vector<SweepRow> sweep_compare(const Config& config, Framework framework, int parallel = 1);

// Header Ps_W, regime, eta_star_bits_per_J, min_bits, sum_bits, sum_energy_J, jain_index,
// outer_iters, inner_iters, status, external_baseline (reserved, left empty).
std::string sweep_csv(const std::vector<SweepRow>& rows);

// Header Ps_W, regime, iteration, eta_bits_per_J.
std::string trace_csv(const std::vector<SweepRow>& rows);

}  // namespace wpmec
