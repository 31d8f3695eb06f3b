#include "wpmec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

namespace wpmec {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw SolverError(ErrorKind::ConfigError, msg); }

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) config_error(path + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) config_error(path + "." + key + ": unknown key");
  }
}

void read(const json& obj, const char* key, const std::string& path, double& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(path + "." + key + ": expected a number");
  out = v.get<double>();
}

void read(const json& obj, const char* key, const std::string& path, int& out) {
  if (!obj.contains(key)) return;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) config_error(path + "." + key + ": expected an integer");
  out = v.get<int>();
}

// Runs a validate() and reports its failure under the config path.
template <class T>
void validated(const T& x, const std::string& path) {
  try {
    x.validate();
  } catch (const SolverError& e) {
    config_error(path + ": " + e.what());
  }
}

SystemParams parse_system(const json& j) {
  SystemParams s;
  const std::string p = "system";
  check_keys(j, p, {"T", "B", "C", "gamma_c", "sigma2", "zeta", "eh", "tol_outer", "tol_sca", "tol_alt",
                    "tol_dual", "max_iters", "max_sca_iters", "max_alt_iters"});
  for (auto [key, field] : {std::pair{"T", &s.T}, {"B", &s.B}, {"C", &s.C}, {"gamma_c", &s.gamma_c},
                            {"sigma2", &s.sigma2}, {"zeta", &s.zeta}, {"tol_outer", &s.tol_outer},
                            {"tol_sca", &s.tol_sca}, {"tol_alt", &s.tol_alt}, {"tol_dual", &s.tol_dual}})
    read(j, key, p, *field);
  read(j, "max_iters", p, s.max_iters);
  read(j, "max_sca_iters", p, s.max_sca_iters);
  read(j, "max_alt_iters", p, s.max_alt_iters);
  if (j.contains("eh")) {
    const json& e = j.at("eh");
    check_keys(e, p + ".eh", {"P_max", "P0", "mu", "psi", "model", "efficiency"});
    read(e, "P_max", p + ".eh", s.eh.P_max);
    read(e, "P0", p + ".eh", s.eh.P0);
    read(e, "mu", p + ".eh", s.eh.mu);
    read(e, "psi", p + ".eh", s.eh.psi);
    read(e, "efficiency", p + ".eh", s.eh.efficiency);
    if (e.contains("model")) {
      const json& m = e.at("model");
      if (m == "nonlinear")
        s.eh.kind = EhModelKind::NonLinear;
      else if (m == "linear")
        s.eh.kind = EhModelKind::LinearBaseline;
      else
        config_error(p + ".eh.model: expected \"nonlinear\" or \"linear\"");
    }
  }
  validated(s, p);
  return s;
}

void read_user_fields(const json& j, const std::string& p, UserParams& u) {
  for (auto [key, field] : {std::pair{"h", &u.h}, {"g", &u.g}, {"v", &u.v}, {"P_r", &u.P_r}, {"P_c", &u.P_c},
                            {"R_min", &u.R_min}})
    read(j, key, p, *field);
}

std::vector<double> parse_sweep(const json& j) {
  const std::string p = "sweep";
  check_keys(j, p, {"Ps", "start", "stop", "step"});
  if (j.contains("Ps")) {
    if (j.contains("start") || j.contains("stop") || j.contains("step"))
      config_error(p + ": give either Ps or start/stop/step");
    const json& list = j.at("Ps");
    if (!list.is_array()) config_error(p + ".Ps: expected a list");
    std::vector<double> ps;
    for (const json& v : list) {
      if (!v.is_number() || !(v.get<double>() > 0)) config_error(p + ".Ps: entries must be positive numbers");
      ps.push_back(v.get<double>());
    }
    return ps;
  }
  double start = 0, stop = 0, step = 0;
  for (const char* key : {"start", "stop", "step"})
    if (!j.contains(key)) config_error(p + "." + key + ": missing");
  read(j, "start", p, start);
  read(j, "stop", p, stop);
  read(j, "step", p, step);
  if (!(start > 0) || !(step > 0) || !(stop >= start)) config_error(p + ": need 0 < start <= stop and step > 0");
  const int n = static_cast<int>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> ps(n);
  for (int i = 0; i < n; ++i) ps[i] = start + i * step;
  return ps;
}

json user_json(const UserParams& u) {
  return {{"h", u.h}, {"g", u.g}, {"v", u.v}, {"P_r", u.P_r}, {"P_c", u.P_c}, {"R_min", u.R_min}};
}

std::string number(double x) { return fmt::format("{:.10e}", x); }

}  // namespace

Users draw_users(const ChannelModel& model, const UserParams& base, std::uint64_t seed) {
  if (model.K < 1) throw SolverError(ErrorKind::InvalidInput, "channel model needs K >= 1");
  if (!(model.d_min > 0) || !(model.d_max >= model.d_min) || !(model.exponent > 0))
    throw SolverError(ErrorKind::InvalidInput, "channel model needs 0 < d_min <= d_max and exponent > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(model.d_min, model.d_max);
  std::exponential_distribution<double> fade(1.0);
  Users users(model.K, base);
  for (auto& u : users) {
    const double loss = std::pow(dist(rng), -model.exponent);
    u.h = loss * fade(rng);
    u.g = loss * fade(rng);
  }
  return users;
}

Users default_users() {
  const double h[] = {1.3, 1.6, 1.9, 2.2, 2.5};
  const double g[] = {1e-8, 1e-4, 1e-3, 1e-2, 1e-1};
  Users users(5);
  for (int k = 0; k < 5; ++k) {
    users[k].h = h[k];
    users[k].g = g[k];
  }
  return users;
}

std::vector<double> default_sweep() {
  std::vector<double> ps;
  for (int i = 1; i <= 8; ++i) ps.push_back(0.005 * i);
  return ps;
}

Config default_config() {
  Config c;
  c.users = default_users();
  c.ps = default_sweep();
  return c;
}

Config parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    // The message carries the line and column.
    config_error(e.what());
  }
  check_keys(j, "config", {"system", "users", "sweep", "regimes", "frameworks", "seed"});

  Config c;
  if (j.contains("system")) c.sys = parse_system(j.at("system"));

  bool has_seed = false;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) config_error("config.seed: expected a non-negative integer");
    c.seed = j.at("seed").get<std::uint64_t>();
    has_seed = true;
  }
  if (seed_override) {
    c.seed = *seed_override;
    has_seed = true;
  }

  if (!j.contains("users")) config_error("config.users: missing");
  const json& u = j.at("users");
  if (u.is_array()) {
    if (u.empty()) config_error("users: at least one user is required");
    for (size_t k = 0; k < u.size(); ++k) {
      const std::string p = "users[" + std::to_string(k) + "]";
      check_keys(u[k], p, {"h", "g", "v", "P_r", "P_c", "R_min"});
      if (!u[k].contains("h") || !u[k].contains("g")) config_error(p + ": h and g are required");
      UserParams user;
      read_user_fields(u[k], p, user);
      validated(user, p);
      c.users.push_back(user);
    }
  } else if (u.is_object()) {
    check_keys(u, "users", {"model", "K", "d_min", "d_max", "exponent", "v", "P_r", "P_c", "R_min"});
    if (u.value("model", std::string()) != "distance") config_error("users.model: expected \"distance\"");
    if (!has_seed) config_error("config.seed: required when users are drawn from the channel model");
    ChannelModel m;
    read(u, "K", "users", m.K);
    read(u, "d_min", "users", m.d_min);
    read(u, "d_max", "users", m.d_max);
    read(u, "exponent", "users", m.exponent);
    UserParams base;
    read_user_fields(u, "users", base);
    validated(base, "users");
    try {
      c.users = draw_users(m, base, c.seed);
    } catch (const SolverError& e) {
      config_error(std::string("users: ") + e.what());
    }
    c.channel = m;
  } else {
    config_error("users: expected a list of users or a channel model object");
  }

  c.ps = j.contains("sweep") ? parse_sweep(j.at("sweep")) : std::vector<double>{};

  if (j.contains("regimes")) {
    const json& r = j.at("regimes");
    if (!r.is_array()) config_error("regimes: expected a list");
    c.regimes.clear();
    std::set<Regime> seen;
    for (const json& name : r) {
      if (!name.is_string()) config_error("regimes: entries must be strings");
      Regime reg;
      try {
        reg = parse_regime(name.get<std::string>());
      } catch (const SolverError& e) {
        config_error(std::string("regimes: ") + e.what());
      }
      if (seen.insert(reg).second) c.regimes.push_back(reg);
    }
    std::sort(c.regimes.begin(), c.regimes.end());
  }
  if (j.contains("frameworks")) {
    const json& f = j.at("frameworks");
    if (!f.is_array()) config_error("frameworks: expected a list");
    c.frameworks.clear();
    for (const json& name : f) {
      if (name == "CE")
        c.frameworks.push_back(Framework::CE);
      else if (name == "CB")
        c.frameworks.push_back(Framework::CB);
      else
        config_error("frameworks: entries must be \"CE\" or \"CB\"");
    }
    std::sort(c.frameworks.begin(), c.frameworks.end());
    c.frameworks.erase(std::unique(c.frameworks.begin(), c.frameworks.end()), c.frameworks.end());
  }
  return c;
}

std::string manifest_json(const Config& c) {
  const SystemParams& s = c.sys;
  json eh = {{"P_max", s.eh.P_max}, {"P0", s.eh.P0}, {"mu", s.eh.mu}, {"psi", s.eh.psi},
             {"model", s.eh.kind == EhModelKind::NonLinear ? "nonlinear" : "linear"},
             {"efficiency", s.eh.efficiency}};
  json sys = {{"T", s.T},
              {"B", s.B},
              {"C", s.C},
              {"gamma_c", s.gamma_c},
              {"sigma2", s.sigma2},
              {"zeta", s.zeta},
              {"eh", eh},
              {"tol_outer", s.tol_outer},
              {"tol_sca", s.tol_sca},
              {"tol_alt", s.tol_alt},
              {"tol_dual", s.tol_dual},
              {"max_iters", s.max_iters},
              {"max_sca_iters", s.max_sca_iters},
              {"max_alt_iters", s.max_alt_iters}};
  json users = json::array();
  for (const auto& u : c.users) users.push_back(user_json(u));
  json regimes = json::array();
  for (Regime r : c.regimes) regimes.push_back(regime_name(r));
  json frameworks = json::array();
  for (Framework f : c.frameworks) frameworks.push_back(framework_name(f));
  json out = {{"system", sys}, {"users", users},      {"sweep", {{"Ps", c.ps}}},
              {"regimes", regimes}, {"frameworks", frameworks}, {"seed", c.seed}};
  return out.dump(2) + "\n";
}

double fairness_index(const VectorXd& ce) {
  if (ce.size() == 0) throw SolverError(ErrorKind::InvalidInput, "fairness index of an empty vector");
  if ((ce.array() < 0).any() || !ce.allFinite())
    throw SolverError(ErrorKind::InvalidInput, "fairness index needs finite non-negative values");
  const double sq = ce.squaredNorm();
  if (sq == 0.0) throw SolverError(ErrorKind::AllZero, "every value is zero");
  return ce.sum() * ce.sum() / (static_cast<double>(ce.size()) * sq);
}

std::vector<SweepRow> sweep_compare(const Config& config, Framework framework, int parallel) {
  struct Task {
    double Ps;
    Regime regime;
  };
  std::vector<Task> tasks;
  for (double ps : config.ps)
    for (Regime r : config.regimes) tasks.push_back({ps, r});
  std::vector<SweepRow> rows(tasks.size());

  auto solve = [&](const Task& t) {
    SweepRow row;
    row.Ps = t.Ps;
    row.regime = t.regime;
    SystemParams sys = config.sys;
    sys.P_th = t.Ps;
    try {
      const SolveReport r = solve_regime(t.regime, framework, config.users, sys);
      const auto m = regime_metrics(r.alloc, t.regime, config.users, sys);
      const int K = static_cast<int>(m.size());
      VectorXd ce(K);
      row.min_bits = INFINITY;
      for (int k = 0; k < K; ++k) {
        ce(k) = m[k].ce;
        row.min_bits = std::min(row.min_bits, m[k].bits);
        row.sum_bits += m[k].bits;
        row.sum_energy += m[k].energy;
      }
      row.eta_star = ce.minCoeff();
      if (!ce.isZero(0.0)) row.jain = fairness_index(ce);
      row.outer_iters = r.iterations;
      row.inner_iters = r.inner_iterations;
      row.status = r.status;
      row.eta_trace = r.eta_trace;
      row.alloc = r.alloc;
      row.solved = true;
    } catch (const SolverError& e) {
      row.status = e.kind() == ErrorKind::Infeasible ? "infeasible" : std::string("error: ") + e.what();
      row.hard_failure = e.kind() != ErrorKind::Infeasible;
    }
    return row;
  };

  const int threads = std::clamp(parallel, 1, std::max(1, static_cast<int>(tasks.size())));
  if (threads == 1) {
    for (size_t i = 0; i < tasks.size(); ++i) rows[i] = solve(tasks[i]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (size_t i = next++; i < tasks.size(); i = next++) rows[i] = solve(tasks[i]);
      });
    for (auto& th : pool) th.join();
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return a.Ps != b.Ps ? a.Ps < b.Ps : a.regime < b.regime;
  });
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "Ps_W,regime,eta_star_bits_per_J,min_bits,sum_bits,sum_energy_J,jain_index,outer_iters,inner_iters,status,"
      "external_baseline\n";
  for (const auto& r : rows) {
    // Status text may contain commas or quotes.
    std::string status = r.status;
    for (size_t i = status.find('"'); i != std::string::npos; i = status.find('"', i + 2)) status.insert(i, "\"");
    std::string metrics = ",,,,,,";
    if (r.solved)
      metrics = fmt::format("{},{},{},{},{},{},{}", number(r.eta_star), number(r.min_bits), number(r.sum_bits),
                            number(r.sum_energy), r.jain ? number(*r.jain) : std::string(), r.outer_iters,
                            r.inner_iters);
    out += fmt::format("{},{},{},\"{}\",\n", number(r.Ps), regime_name(r.regime), metrics, status);
  }
  return out;
}

std::string trace_csv(const std::vector<SweepRow>& rows) {
  std::string out = "Ps_W,regime,iteration,eta_bits_per_J\n";
  for (const auto& r : rows)
    for (size_t n = 0; n < r.eta_trace.size(); ++n)
      out += fmt::format("{},{},{},{}\n", number(r.Ps), regime_name(r.regime), n + 1, number(r.eta_trace[n]));
  return out;
}

}  // namespace wpmec
