#include <doctest.h>

#include "../support/oracles.hpp"
#include "sapflow/errors.hpp"
#include "sapflow/micro_heat.hpp"

using namespace sapflow;

namespace {

struct Setup {
  ModelParams p = build_params({});
  EnthalpyLaw law = EnthalpyLaw::sap(p);
  CellGeometry geo = CellGeometry::from(p);
  double a = 3.3e-6;
  double b = geo.R_gamma;
};

MicroHeatResult relax(const Setup& s, double Ta, double Tb, int n = kDefaultMicroNodes) {
  MicroProfile prof = make_profile(s.a, s.b, Ta, Ta, s.law, n);
  MicroHeatResult res;
  for (int k = 0; k < 40; ++k) {
    res = micro_heat_step(prof, s.a, s.b, Ta, Tb, 1.0, s.law, s.p.c_w);
    prof = res.profile;
  }
  return res;
}

}  // namespace

TEST_SUITE("micro_heat") {

TEST_CASE("geometry defaults") {
  const Setup s;
  CHECK(s.geo.R_gamma == doctest::Approx(0.5 * s.p.eps - s.p.R_f));
  CHECK(s.geo.area_Y1 == doctest::Approx(s.p.eps * s.p.eps - kPi * s.geo.R_gamma * s.geo.R_gamma));
  CHECK_THROWS_AS(CellGeometry::from(s.p, s.p.eps), ConfigError);
  CHECK_THROWS_AS(CellGeometry::from(s.p, 0.5 * s.p.R_f), ConfigError);
}

TEST_CASE("uniform profile carries no flux") {
  const Setup s;
  const MicroProfile prof = make_profile(s.a, s.b, s.p.T_c, s.p.T_c, s.law);
  const MicroHeatResult r = micro_heat_step(prof, s.a, s.b, s.p.T_c, s.p.T_c, 10.0, s.law, s.p.c_w);
  // zero up to the round-off of the enthalpy round trip
  CHECK(std::abs(r.interface_gradient) < 1e-6);
  CHECK(std::abs(r.gamma_flux) < 1e-14);
  CHECK(std::abs(gamma_flux_integral(r, s.geo)) < 1e-4);
  for (Eigen::Index k = 0; k < r.profile.size(); ++k) {
    CHECK(omega(r.profile.enthalpy[k], s.law) == doctest::Approx(s.p.T_c).epsilon(1e-14));
  }
}

TEST_CASE("steady state matches the logarithmic profile") {
  const Setup s;
  const double Ta = s.p.T_c + 1.0, Tb = s.p.T_c + 6.0;
  for (int n : {6, 11}) {
    const MicroHeatResult r = relax(s, Ta, Tb, n);
    for (Eigen::Index k = 0; k < r.profile.size(); ++k) {
      const double want = oracle::log_profile(r.profile.radius[k], s.a, s.b, Ta, Tb);
      CHECK(std::abs(omega(r.profile.enthalpy[k], s.law) - want) <= 1e-6 * want);
    }
    const double grad = (Tb - Ta) / (s.a * std::log(s.b / s.a));
    CHECK(r.interface_gradient == doctest::Approx(grad).epsilon(1e-6));
    CHECK(r.gamma_flux == doctest::Approx(s.law.D_water * (Tb - Ta) / std::log(s.b / s.a)).epsilon(1e-6));
  }
}

TEST_CASE("steady fluxes scale linearly") {
  const Setup s;
  const double Ta = s.p.T_c + 1.0;
  const MicroHeatResult one = relax(s, Ta, Ta + 2.0);
  const MicroHeatResult two = relax(s, Ta, Ta + 4.0);
  CHECK(two.interface_gradient == doctest::Approx(2 * one.interface_gradient).epsilon(1e-9));
  CHECK(two.gamma_flux == doctest::Approx(2 * one.gamma_flux).epsilon(1e-9));
}

TEST_CASE("heating draws from the macro scale") {
  const Setup s;
  const MicroHeatResult r = relax(s, s.p.T_c, s.p.T_c + 5.0);
  CHECK(r.gamma_flux > 0);
  CHECK(r.interface_gradient > 0);
  CHECK(gamma_flux_integral(r, s.geo) < 0);
  CellGeometry half = s.geo;
  half.area_Y1 *= 0.5;
  CHECK(gamma_flux_integral(r, half) == doctest::Approx(2 * gamma_flux_integral(r, s.geo)));
  const MicroHeatResult c = relax(s, s.p.T_c, s.p.T_c - 5.0);
  CHECK(gamma_flux_integral(c, s.geo) > 0);
}

TEST_CASE("discrete energy balance") {
  const Setup s;
  const double Ta = s.p.T_c + 0.5, Tb = s.p.T_c + 8.0;
  MicroProfile prof = make_profile(s.a, s.b, Ta, Ta, s.law);
  for (double dt : {1e-4, 1e-3, 1e-2}) {
    const MicroHeatResult r = micro_heat_step(prof, s.a, s.b, Ta, Tb, dt, s.law, s.p.c_w);
    const double dE = micro_energy(r.profile, s.law, s.p.c_w) - micro_energy(prof, s.law, s.p.c_w);
    const double Tin = omega(r.profile.enthalpy[0], s.law), T1 = omega(r.profile.enthalpy[1], s.law);
    const double E_face = 0.5 * (r.profile.enthalpy[0] + r.profile.enthalpy[1]);
    const double inner = diffusivity(E_face, s.law) / std::log(r.profile.radius[1] / r.profile.radius[0]) * (T1 - Tin);
    const double net = dt * (r.gamma_flux - inner);
    CHECK(std::abs(dE - net) <= 1e-8 * std::abs(net));
    prof = r.profile;
  }
}

TEST_CASE("maximum principle") {
  const Setup s;
  const double Ta = s.p.T_c, Tb = s.p.T_c + 7.0;
  MicroProfile prof = make_profile(s.a, s.b, Ta, Ta, s.law);
  for (double dt : {1e-7, 1e-5, 1e-3, 1.0}) {
    const MicroHeatResult r = micro_heat_step(prof, s.a, s.b, Ta, Tb, dt, s.law, s.p.c_w);
    for (Eigen::Index k = 0; k < r.profile.size(); ++k) {
      const double T = omega(r.profile.enthalpy[k], s.law);
      CHECK(T >= Ta - 1e-12);
      CHECK(T <= Tb + 1e-12);
    }
    prof = r.profile;
  }
}

TEST_CASE("first order in time") {
  const Setup s;
  const double Ta = s.p.T_c + 1.0, Tb = s.p.T_c + 6.0, horizon = 4e-5;
  const auto run = [&](int steps) {
    MicroProfile prof = make_profile(s.a, s.b, Ta, Ta, s.law);
    for (int k = 0; k < steps; ++k) {
      prof = micro_heat_step(prof, s.a, s.b, Ta, Tb, horizon / steps, s.law, s.p.c_w).profile;
    }
    return omega(prof.enthalpy[2], s.law);
  };
  const double ref = run(4096);
  const double e1 = std::abs(run(8) - ref), e2 = std::abs(run(16) - ref), e3 = std::abs(run(32) - ref);
  CHECK(std::log2(e1 / e2) > 0.9);
  CHECK(std::log2(e2 / e3) > 0.9);
}

TEST_CASE("moving boundary keeps node count") {
  const Setup s;
  const MicroProfile prof = make_profile(s.a, s.b, s.p.T_c, s.p.T_c + 3, s.law);
  const MicroHeatResult r = micro_heat_step(prof, 0.9 * s.a, s.b, s.p.T_c, s.p.T_c + 3, 1e-3, s.law, s.p.c_w);
  CHECK(r.profile.size() == kDefaultMicroNodes);
  CHECK(r.profile.radius[0] == doctest::Approx(0.9 * s.a));
  CHECK_THROWS_AS(micro_heat_step(prof, s.b, s.a, s.p.T_c, s.p.T_c, 1.0, s.law, s.p.c_w), SolverError);
}

}
