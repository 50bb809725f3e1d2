#include <doctest.h>

#include "../support/oracles.hpp"
#include "sapflow/errors.hpp"
#include "sapflow/microcell.hpp"

using namespace sapflow;

namespace {

ModelParams base() { return build_params({}); }

CellState thawed(const ModelParams& p) {
  CellState s;
  s.s_g = s.s_iw = 2e-6;
  s.r = 1e-5;
  s.T = p.T_c;
  return s;
}

CellState thawing_cell(const CellModel& m, double T) {
  const ModelParams& p = m.params;
  CellState s = initial_cell(m, T);
  s.s_iw = 0.5 * (s.s_g + p.R_f);
  s.tag = {FiberState::thawing, VesselState::thawed};
  s.micro = make_profile(s.s_iw, m.geometry.R_gamma, p.T_c, T, m.sap_law, m.n_y);
  const double Vwf = kPi * p.L_f * (p.R_f * p.R_f - s.s_iw * s.s_iw);
  s.gas_mass_f = s.rho_g_f * (kPi * p.L_f * s.s_g * s.s_g + p.H * Vwf);
  return s;
}

}  // namespace

TEST_SUITE("microcell") {

TEST_CASE("fiber gas rate") {
  const ModelParams p = base();
  CellState s = thawed(p);
  CHECK(fiber_gas_rate(s, 0.0, 0.0, p) == 0.0);
  s.s_iw = 3e-6;
  CHECK(fiber_gas_rate(s, -1e-9, 0.0, p) == doctest::Approx(83.0 * 3e-6 * 1e-9 / (917 * 2e-6)).epsilon(1e-12));
  CHECK(fiber_gas_rate(s, -1e-9, 0.0, p) == doctest::Approx(1.358e-10).epsilon(1e-3));
  ModelParams q = p;
  q.rho_i = q.rho_w;
  CHECK(fiber_gas_rate(s, -1e-9, 0.0, q) == 0.0);
  s.s_g = 1e-10;
  CHECK_THROWS_AS(fiber_gas_rate(s, 0.0, 0.0, p), BubbleCollapse);
}

TEST_CASE("vessel gas rate") {
  const ModelParams p = base();
  CellState s = thawed(p);
  CHECK(vessel_gas_rate(s, 0.0, 0.0, p) == 0.0);
  CHECK(vessel_gas_rate(s, 1e-18, -16e-18, p) == 0.0);
  CHECK(vessel_gas_rate(s, 1e-18, 0.0, p) == doctest::Approx(-16e-18 / (2 * kPi * 5e-4 * 1e-5)).epsilon(1e-12));
  CHECK(vessel_gas_rate(s, 1e-18, 0.0, p) == doctest::Approx(-5.093e-10).epsilon(1e-3));
}

TEST_CASE("Stefan rate") {
  const ModelParams p = base();
  CellState s = thawed(p);
  s.s_iw = 3e-6;
  CHECK(stefan_rate(s, 0.0, 0.0, p) == 0.0);
  CHECK(stefan_rate(s, 1000.0, 0.0, p) == doctest::Approx(-1.670e-6).epsilon(1e-3));
  CHECK(stefan_rate(s, 0.0, 1e-18, p) == doctest::Approx(5.305e-11).epsilon(1e-3));
}

TEST_CASE("wall flux") {
  const ModelParams p = base();
  CellState s = thawed(p);
  s.p_w_f = 1e5;
  s.p_w_v = s.p_w_f + p.C_s * p.Rgas * s.T;
  CHECK(wall_flux_rate(s, p, 0.0) == doctest::Approx(0.0).epsilon(1e-30));

  KeyValueConfig c;
  c.set("gamma_s", 0.0);
  const ModelParams q = build_params(c);
  s.p_w_v = s.p_w_f + 1e5;
  CHECK(wall_flux_rate(s, q, 0.0) == doctest::Approx(-2.175e-16).epsilon(1e-3));

  s.p_w_v = s.p_w_f;
  CHECK(wall_flux_rate(s, p, 0.0) == doctest::Approx(4.33e-16).epsilon(2e-3));
  CHECK(p.Lw * p.A_fv / p.N == doctest::Approx(2.175e-21).epsilon(1e-3));

  s.tag.vessel = VesselState::frozen;
  CHECK(wall_flux_rate(s, p, 0.0) == 0.0);
}

TEST_CASE("ice pressure only for frozen fibre with thawed vessel") {
  const ModelParams p = base();
  const CellModel m(p);
  CellState s = thawed(p);
  s.p_w_v = s.p_w_f = 0;
  s.s_iw = p.R_f;
  const double open = wall_flux_rate(s, m);
  s.tag = {FiberState::frozen, VesselState::thawed};
  const double suction = wall_flux_rate(s, m);
  CHECK(suction == doctest::Approx(open - p.Lw * p.A_fv / p.N * 2 * p.sigma_iw / p.R_f));
  CHECK(young_laplace_ice_pressure(s, p) == doctest::Approx(2 * 0.033 / p.R_f));
}

TEST_CASE("root flux check valve") {
  const ModelParams p = base();
  CellState s = thawed(p);
  s.p_w_v = p.p_soil;
  CHECK(root_flux_rate(s, p) == 0.0);
  s.p_w_v = p.p_soil - 1e5;
  const double in = root_flux_rate(s, p);
  CHECK(in == doctest::Approx(3.078e-17).epsilon(2e-3));
  s.p_w_v = p.p_soil + 1e5;
  const double out = root_flux_rate(s, p);
  CHECK(out == doctest::Approx(-6.16e-18).epsilon(2e-3));
  CHECK(std::abs(out) == p.Cr_out * std::abs(in));
  for (double cr : {0.05, 0.75}) {
    ModelParams q = p;
    q.Cr_out = cr;
    for (double dp : {1.0, 3e3, 2e5}) {
      s.p_w_v = p.p_soil + dp;
      const double o = root_flux_rate(s, q);
      s.p_w_v = p.p_soil - dp;
      CHECK(std::abs(o) == doctest::Approx(cr * std::abs(root_flux_rate(s, q))).epsilon(1e-15));
    }
  }
}

TEST_CASE("gas closures") {
  const ModelParams p = base();
  CHECK(liquid_pressure(1.2, 1e-5, p) == doctest::Approx(78771).epsilon(1e-4));
  CHECK(liquid_pressure(1.2, 2e-6, p) == doctest::Approx(17963).epsilon(1e-3));
  CHECK(gas_density(2.0, 1.0, 2.0, p.H) == doctest::Approx(2 * gas_density(2.0, 2.0, 4.0, p.H)));

  const CellModel m(p);
  CellState s = initial_cell(m, p.T_c + 5);
  const GasState v0 = vessel_pressure(s, p), f0 = fiber_pressure(s, p);
  CHECK(vessel_pressure(s, p).rho_g == v0.rho_g);
  CHECK(v0.p_w == doctest::Approx(p.p_soil).epsilon(1e-12));

  ModelParams dry = p;
  dry.H = 0;
  s.gas_mass_f = f0.rho_g * kPi * p.L_f * s.s_g * s.s_g;
  const GasState before = fiber_pressure(s, dry);
  s.s_g /= std::sqrt(2.0);
  const GasState after = fiber_pressure(s, dry);
  CHECK(after.rho_g == doctest::Approx(2 * before.rho_g).epsilon(1e-12));
}

TEST_CASE("phase tags") {
  int admissible = 0;
  for (FiberState f : {FiberState::frozen, FiberState::thawing, FiberState::thawed, FiberState::freezing})
    for (VesselState v : {VesselState::frozen, VesselState::thawed}) admissible += is_admissible({f, v});
  CHECK(admissible == 6);
  CHECK_FALSE(is_admissible({FiberState::thawing, VesselState::frozen}));
  CHECK_FALSE(is_admissible({FiberState::thawed, VesselState::frozen}));
  CHECK(is_adjacent(FiberState::frozen, FiberState::thawing));
  CHECK(is_adjacent(FiberState::freezing, FiberState::frozen));
  CHECK_FALSE(is_adjacent(FiberState::frozen, FiberState::thawed));
  CHECK(to_string(PhaseTag{}) == "thawed/thawed");
}

TEST_CASE("temperature transitions follow the cycle") {
  const ModelParams p = base();
  const CellModel m(p);
  CellState s = initial_cell(m, p.T_c + 5);
  CHECK(apply_temperature_transitions(s, p.T_c - 0.05, m) == 0);
  CHECK(s.tag == PhaseTag{FiberState::freezing, VesselState::thawed});
  CHECK(apply_temperature_transitions(s, p.T_c_sap - 0.05, m) == 0);
  CHECK(s.tag == PhaseTag{FiberState::freezing, VesselState::frozen});
  CHECK(is_admissible(s.tag));
  s.tag.fiber = FiberState::frozen;
  apply_temperature_transitions(s, p.T_c_sap + 0.01, m);
  CHECK(s.tag == PhaseTag{FiberState::frozen, VesselState::thawed});
  apply_temperature_transitions(s, p.T_c + 1, m);
  CHECK(s.tag == PhaseTag{FiberState::thawing, VesselState::thawed});
  CHECK(s.micro.size() == m.n_y);
}

TEST_CASE("initial cell balances soil pressure") {
  const ModelParams p = base();
  const CellModel m(p);
  const CellState s = initial_cell(m, p.T_c + 5);
  CHECK(s.p_w_v == doctest::Approx(p.p_soil).epsilon(1e-12));
  CHECK(std::abs(wall_flux_rate(s, m)) < 1e-30);
  CHECK(s.s_g == doctest::Approx(p.fiber_gas0 * p.R_f));
  CHECK(kPi * s.r * s.r == doctest::Approx(p.vessel_gas0 * kPi * p.R_v * p.R_v));
  CHECK(s.s_g <= s.s_iw);
  CHECK(s.s_iw <= p.R_f);
}

TEST_CASE("equilibrated thawed cell is a fixed point") {
  const ModelParams p = base();
  const CellModel m(p);
  const CellState s = initial_cell(m, p.T_c + 5);
  const CellState t = step_cell(s, p.T_c + 5, 600.0, m, IntegratorConfig{});
  CHECK(t.s_g == doctest::Approx(s.s_g).epsilon(1e-10));
  CHECK(t.r == doctest::Approx(s.r).epsilon(1e-10));
  CHECK(std::abs(t.U) < 1e-25);
  CHECK(std::abs(t.U_r) < 1e-25);
  CHECK(t.tag == s.tag);
}

TEST_CASE("fully frozen cell does not move") {
  const ModelParams p = base();
  const CellModel m(p);
  CellState s = initial_cell(m, p.T_c + 5);
  s.U = 1e-16;
  s.U_r = -2e-16;
  s.s_iw = p.R_f;
  s.tag = {FiberState::frozen, VesselState::frozen};
  const CellState t = step_cell(s, p.T_c - 5, 3600.0, m, IntegratorConfig{});
  CHECK(t.U == s.U);
  CHECK(t.U_r == s.U_r);
  CHECK(t.r == s.r);
  CHECK(t.s_g == s.s_g);
  CHECK(t.s_iw == s.s_iw);
}

TEST_CASE("thawing interface recedes monotonically") {
  const ModelParams p = base();
  const CellModel m(p);
  const double T = p.T_c + 2;
  CellState s = thawing_cell(m, T);
  double last = s.s_iw;
  int moves = 0;
  for (int k = 0; k < 1000 && s.tag.fiber == FiberState::thawing; ++k) {
    s = step_cell(s, T, 1e-5, m, IntegratorConfig{});
    if (s.tag.fiber != FiberState::thawing) break;
    CHECK(s.s_iw < last);
    last = s.s_iw;
    ++moves;
  }
  CHECK(moves > 3);
  CHECK(s.s_g <= s.s_iw);
}

TEST_CASE("invariants hold across a freeze-thaw cycle") {
  const ModelParams p = base();
  const CellModel m(p);
  CellState s = initial_cell(m, p.T_c + 5);
  CellStepStats stats;
  IntegratorConfig cfg;
  for (double T : {p.T_c + 3, p.T_c - 0.5, p.T_c - 2, p.T_c - 4, p.T_c_sap + 0.05, p.T_c + 0.5, p.T_c + 3, p.T_c + 5}) {
    s = step_cell(s, T, 1800.0, m, cfg, &stats);
    CHECK(0 <= s.s_g);
    CHECK(s.s_g <= s.s_iw);
    CHECK(s.s_iw <= p.R_f * (1 + 1e-12));
    CHECK(0 < s.r);
    CHECK(s.r <= p.R_v);
    CHECK(is_admissible(s.tag));
  }
  CHECK(stats.substeps > 0);
  CHECK(stats.fiber_residual < 1e-8);
  CHECK(stats.vessel_residual < 1e-8);
  CHECK(stats.gas_residual < 1e-12);
  CHECK(stats.forced == 0);
}

TEST_CASE("agrees with an explicit Euler oracle") {
  const ModelParams p = base();
  const CellModel m(p);
  const double T0 = p.T_c + 5, T = p.T_c + 15, horizon = 64.0;
  CellState s0 = initial_cell(m, T0);
  s0.gas_mass_v *= 1.05;
  const oracle::ThawedCell ref = oracle::euler_thawed_cell(s0, T, horizon, 1e-3, p);
  REQUIRE(std::abs(ref.U) > 0);

  std::vector<double> err;
  for (double h : {2.0, 1.0, 0.5, 0.25}) {
    IntegratorConfig cfg;
    cfg.cell_fixed_substep = h;
    const CellState t = step_cell(s0, T, horizon, m, cfg);
    err.push_back(std::abs(t.U - ref.U) / std::abs(ref.U) + std::abs(t.r - ref.r) / ref.r +
                  std::abs(t.s_g - ref.s_g) / ref.s_g);
  }
  CHECK(err.back() < 1e-2);
  for (std::size_t k = 0; k + 1 < err.size(); ++k) CHECK(std::log2(err[k] / err[k + 1]) >= 0.9);
}

}
