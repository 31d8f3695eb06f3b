#include <doctest.h>

#include <random>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "wpmec/model.hpp"

using namespace wpmec;
using mp = boost::multiprecision::cpp_bin_float_50;

namespace {

// Independent long-form evaluation of the logistic EH curve.
mp eh_reference(const mp& rf, const EhParams& e) {
  const mp a = exp(mp(e.psi) - mp(e.mu) * mp(e.P0));
  const mp b = exp(mp(e.psi) - mp(e.mu) * rf);
  const mp omega = 1 / (1 + a);
  const mp logistic = mp(e.P_max) / (1 + b);
  const mp p = (logistic - mp(e.P_max) * omega) / (1 - omega);
  return p > 0 ? p : mp(0);
}

UserParams user(double h, double g) {
  UserParams u;
  u.h = h;
  u.g = g;
  return u;
}

}  // namespace

TEST_CASE("harvested energy at the sensitivity threshold is zero") {
  SystemParams sys;
  UserParams u = user(1.0, 1.0);
  CHECK(std::abs(harvested_energy(0.7, sys.eh.P0, u, sys)) <= 1e-18);
  CHECK(harvested_energy(1.0, 0.5 * sys.eh.P0, u, sys) == 0.0);
  CHECK(harvested_energy(1.0, 0.0, u, sys) == 0.0);
}

TEST_CASE("harvested power saturates at P_max") {
  SystemParams sys;
  UserParams u = user(1.0, 1.0);
  CHECK(harvested_energy(1.0, 10.0, u, sys) == doctest::Approx(0.004927).epsilon(1e-12));
  CHECK(std::abs(harvested_power(u, 0.1, sys) - sys.eh.P_max) < 1e-6);
}

TEST_CASE("harvested energy frozen value at 1 mW input") {
  SystemParams sys;
  UserParams u = user(1.0, 1.0);
  const double frozen = 5.528277559523388788818e-4;
  CHECK(harvested_energy(1.0, 1e-3, u, sys) == doctest::Approx(frozen).epsilon(1e-13));
  const mp ref = eh_reference(mp(1e-3), sys.eh);
  CHECK(std::abs(harvested_energy(1.0, 1e-3, u, sys) - ref.convert_to<double>()) < 1e-17);
}

TEST_CASE("harvested power matches the high precision reference and is monotone") {
  SystemParams sys;
  double prev = -1.0;
  for (int i = 0; i <= 400; ++i) {
    const double rf = 1e-6 * std::pow(10.0, 5.0 * i / 400.0);
    const double p = harvested_power(rf, sys.eh);
    const double ref = eh_reference(mp(rf), sys.eh).convert_to<double>();
    CHECK(std::abs(p - ref) <= 1e-15 + 1e-12 * ref);
    CHECK(p >= prev);
    CHECK(p <= sys.eh.P_max + 1e-12);
    prev = p;
  }
}

TEST_CASE("linear baseline harvester") {
  SystemParams sys;
  sys.eh.kind = EhModelKind::LinearBaseline;
  sys.eh.efficiency = 0.5;
  UserParams u = user(0.2, 1.0);
  CHECK(harvested_energy(2.0, 0.01, u, sys) == doctest::Approx(2.0 * 0.5 * 0.2 * 0.01));
}

TEST_CASE("TDMA offload bits") {
  SystemParams sys;
  UserParams u = user(1.0, 1.0);
  u.v = 1.0;
  const double P_unit = sys.sigma2 / u.g;
  CHECK(offload_bits_tdma(0.1, P_unit, u, sys) == doctest::Approx(2e5).epsilon(1e-14));
  CHECK(offload_bits_tdma(0.1, 0.0, u, sys) == 0.0);
  CHECK(offload_bits_tdma(0.0, 1.0, u, sys) == 0.0);
  u.v = 1.1;
  CHECK(offload_bits_tdma(0.1, 3.0 * P_unit, u, sys) == doctest::Approx(363636.3636363636).epsilon(1e-13));
  double prev = 0.0;
  for (int i = 1; i < 50; ++i) {
    const double b = offload_bits_tdma(0.1, i * 1e-3, u, sys);
    CHECK(b > prev);
    prev = b;
  }
}

TEST_CASE("NOMA offload bits") {
  SystemParams sys;
  Users us = {user(1.0, 0.5), user(1.0, 2.0)};
  for (auto& u : us) u.v = 1.0;
  VectorXd P(2);
  P << sys.sigma2 / 0.5, sys.sigma2 / 2.0;
  CHECK(offload_bits_noma(0.1, P, 1, us, sys) == doctest::Approx(2e5).epsilon(1e-14));
  CHECK(offload_bits_noma(0.1, P, 0, us, sys) == doctest::Approx(116992.500144231236).epsilon(1e-13));
  CHECK(offload_bits_noma(0.1, P, 1, us, sys) == offload_bits_tdma(0.1, P(1), us[1], sys));
  VectorXd P0 = P;
  P0(0) = 0.0;
  CHECK(offload_bits_noma(0.1, P0, 0, us, sys) == 0.0);

  VectorXd P2 = P;
  P2(1) *= 3.0;
  CHECK(offload_bits_noma(0.1, P2, 0, us, sys) < offload_bits_noma(0.1, P, 0, us, sys));

  Users bad = {us[1], us[0]};
  CHECK_THROWS_AS(offload_bits_noma(0.1, P, 0, bad, sys), SolverError);
}

TEST_CASE("NOMA interference only hurts") {
  SystemParams sys;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.1, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Users us(4);
    for (auto& u : us) u = user(1.0, U(rng));
    std::sort(us.begin(), us.end(), [](auto& a, auto& b) { return a.g < b.g; });
    VectorXd P = VectorXd::Constant(4, 1e-3);
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double b = offload_bits_noma(0.2, P, k, us, sys);
      CHECK(b <= offload_bits_tdma(0.2, P(k), us[k], sys) + 1e-9);
      sum += b;
    }
    CHECK(sum <= 4 * offload_bits_tdma(0.2, P(3), us[3], sys));
  }
}

TEST_CASE("local computing") {
  SystemParams sys;
  CHECK(local_bits(1e6, sys) == doctest::Approx(1000.0));
  CHECK(local_energy(1e6, sys) == doctest::Approx(1e-10));
  CHECK(local_bits(0.0, sys) == 0.0);
  CHECK(local_energy(0.0, sys) == 0.0);
}

TEST_CASE("evaluate collapses binary modes to the pure regimes") {
  SystemParams sys;
  Users us = {user(0.8, 0.3), user(0.6, 0.9)};
  Allocation a = Allocation::zeros(2, 0.02);
  a.tau0 = 0.3;
  a.tau << 0.2, 0.25;
  a.P << 1e-3, 2e-3;
  a.f << 3e7, 4e7;

  a.alpha = VectorXd::Zero(2);
  auto m = evaluate(a, Regime::TdmaBinary, us, sys);
  for (int k = 0; k < 2; ++k) {
    CHECK(m[k].bits == sys.T * a.f(k) / sys.C);
    CHECK(m[k].energy == a.tau0 * us[k].P_r + sys.T * sys.gamma_c * std::pow(a.f(k), 3));
  }
  a.alpha = VectorXd::Ones(2);
  m = evaluate(a, Regime::TdmaBinary, us, sys);
  for (int k = 0; k < 2; ++k) {
    CHECK(m[k].bits == offload_bits_tdma(a.tau(k), a.P(k), us[k], sys));
    CHECK(m[k].energy == a.tau0 * us[k].P_r + sys.zeta * a.tau(k) * (a.P(k) + us[k].P_c));
  }
}

TEST_CASE("evaluate agrees with a long-form recomputation") {
  SystemParams sys;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Users us = {user(U(rng), 0.1 + U(rng)), user(U(rng), 0.1 + U(rng))};
    std::sort(us.begin(), us.end(), [](auto& a, auto& b) { return a.g < b.g; });
    Allocation a = Allocation::zeros(2, 0.025);
    a.tau0 = 0.3 * U(rng);
    a.tau << 0.3 * U(rng), 0.3 * U(rng);
    a.tau1 = 0.4 * U(rng);
    a.P << 1e-3 * U(rng), 1e-3 * U(rng);
    a.f << 1e7 * U(rng), 1e7 * U(rng);
    auto tdma = evaluate(a, Regime::TdmaPartial, us, sys);
    auto noma = evaluate(a, Regime::NomaPartial, us, sys);
    for (int k = 0; k < 2; ++k) {
      const mp loc = mp(sys.T) * a.f(k) / sys.C;
      const mp eloc = mp(sys.T) * sys.gamma_c * pow(mp(a.f(k)), 3);
      const mp rt = mp(sys.B) * a.tau(k) / us[k].v * log2(1 + mp(us[k].g) * a.P(k) / sys.sigma2);
      const mp et = mp(a.tau0) * us[k].P_r + mp(sys.zeta) * a.tau(k) * (mp(a.P(k)) + us[k].P_c);
      CHECK(std::abs(tdma[k].bits - (loc + rt).convert_to<double>()) < 1e-9 * tdma[k].bits);
      CHECK(std::abs(tdma[k].energy - (eloc + et).convert_to<double>()) < 1e-13 * tdma[k].energy);
      const mp interf = k == 0 ? mp(us[1].g) * a.P(1) : mp(0);
      const mp rn = mp(sys.B) * a.tau1 / us[k].v * log2(1 + mp(us[k].g) * a.P(k) / (interf + sys.sigma2));
      CHECK(std::abs(noma[k].bits - (loc + rn).convert_to<double>()) < 1e-9 * noma[k].bits);
      CHECK(noma[k].ce == doctest::Approx(noma[k].bits / noma[k].energy));
    }
  }
}

TEST_CASE("evaluate is deterministic") {
  SystemParams sys;
  Users us = {user(0.8, 0.3), user(0.6, 0.9)};
  Allocation a = Allocation::zeros(2, 0.02);
  a.tau0 = 0.1;
  a.tau1 = 0.2;
  a.P << 1e-4, 1e-3;
  a.f << 1e7, 2e7;
  auto m1 = evaluate(a, Regime::NomaPartial, us, sys);
  auto m2 = evaluate(a, Regime::NomaPartial, us, sys);
  for (int k = 0; k < 2; ++k) {
    CHECK(m1[k].bits == m2[k].bits);
    CHECK(m1[k].energy == m2[k].energy);
  }
}

TEST_CASE("feasibility residuals") {
  SystemParams sys;
  Users us = {user(0.8, 0.3), user(0.6, 0.9)};
  for (auto& u : us) u.R_min = 0.0;
  Allocation z = Allocation::zeros(2, 0.0);
  for (Regime r : {Regime::TdmaPartial, Regime::NomaPartial, Regime::TdmaBinary, Regime::NomaBinary})
    CHECK(max_violation(feasibility_residuals(z, r, us, sys)) <= 0.0);

  Allocation a = Allocation::zeros(2, 0.025);
  a.tau0 = sys.T;
  a.tau << 0.1, 0.0;
  auto res = feasibility_residuals(a, Regime::TdmaPartial, us, sys);
  for (const auto& r : res)
    if (r.name == "time_budget") CHECK(r.value > 0);

  // energy use pinned exactly to the harvest
  Allocation b = Allocation::zeros(2, 0.025);
  b.tau0 = 0.4;
  for (int k = 0; k < 2; ++k) {
    const double budget = harvested_energy(b.tau0, b.Ps, us[k], sys) - b.tau0 * us[k].P_r;
    b.f(k) = std::cbrt(budget / (sys.T * sys.gamma_c));
  }
  for (const auto& r : feasibility_residuals(b, Regime::TdmaPartial, us, sys))
    if (r.name == "eh_causality") CHECK(std::abs(r.value) < 1e-12);
}

TEST_CASE("parameter validation") {
  SystemParams sys;
  CHECK_NOTHROW(sys.validate());
  sys.zeta = 0.5;
  CHECK_THROWS_AS(sys.validate(), SolverError);
  UserParams u;
  u.v = 1.0;
  CHECK_THROWS_AS(u.validate(), SolverError);
  CHECK(dbm_to_watt(5.0) == doctest::Approx(3.1622776601683794e-3));
}
