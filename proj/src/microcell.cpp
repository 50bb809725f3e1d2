#include "sapflow/microcell.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "sapflow/errors.hpp"

namespace sapflow {

namespace {

using Vec = Eigen::Matrix<double, 5, 1>;
using Mat = Eigen::Matrix<double, 5, 5>;
// State vector in squared radii: the volume constraints are linear in these.
enum : int { kAg = 0, kAiw = 1, kQ = 2, kU = 3, kUr = 4 };

constexpr double kNewtonTol = 1e-10;  // scaled units
constexpr double kFdStep = 1e-7;      // scaled units

Vec scales(const ModelParams& p) {
  Vec s;
  s << p.R_f * p.R_f, p.R_f * p.R_f, p.R_v * p.R_v, kPi * p.R_f * p.R_f * p.L_f,
      kPi * p.R_v * p.R_v * p.L_v;
  return s;
}

Vec to_vector(const CellState& s) {
  Vec y;
  y << s.s_g * s.s_g, s.s_iw * s.s_iw, s.r * s.r, s.U, s.U_r;
  return y;
}

void refresh_gas(CellState& s, const ModelParams& p) {
  const GasState v = vessel_pressure(s, p);
  s.p_w_v = v.p_w;
  s.rho_g_v = v.rho_g;
  const GasState f = fiber_pressure(s, p);
  s.p_w_f = f.p_w;
  s.rho_g_f = f.rho_g;
}

void assign(CellState& s, const Vec& y, const CellModel& m) {
  const double floor2 = m.radius_floor * m.radius_floor;
  if (!(y[kAg] > floor2)) throw BubbleCollapse("fiber gas bubble reached the radius floor");
  if (!(y[kQ] > floor2)) throw BubbleCollapse("vessel gas bubble reached the radius floor");
  if (!(y[kAiw] > 0.0)) throw SolverError("fiber ice-water radius became non-positive");
  s.s_g = std::sqrt(y[kAg]);
  s.s_iw = std::sqrt(y[kAiw]);
  s.r = std::sqrt(y[kQ]);
  s.U = y[kU];
  s.U_r = y[kUr];
  refresh_gas(s, m.params);
}

struct Eval {
  Vec f = Vec::Zero();
  std::optional<MicroHeatResult> micro;
};

// Right-hand side at y. With an active interface the micro heat equation is
// advanced implicitly over h from the profile held in `base`.
Eval evaluate(const Vec& y, const CellState& base, double h, const CellModel& m) {
  const ModelParams& p = m.params;
  CellState s = base;
  assign(s, y, m);

  Eval ev;
  double Up = 0.0, Urp = 0.0;
  if (s.tag.vessel == VesselState::thawed) {
    Up = wall_flux_rate(s, m);
    Urp = root_flux_rate(s, p);
  }

  const double wall_area = kPi * p.L_f;
  switch (s.tag.fiber) {
    case FiberState::thawed:
      ev.f[kAg] = ev.f[kAiw] = Up / wall_area;
      break;
    case FiberState::frozen:
      ev.f[kAiw] = 0.0;
      ev.f[kAg] = p.rho_w * Up / (wall_area * p.rho_i);
      break;
    case FiberState::thawing:
    case FiberState::freezing: {
      ev.micro = micro_heat_step(base.micro, s.s_iw, m.geometry.R_gamma, p.T_c, s.T, h, m.sap_law,
                                 p.c_w);
      ev.f[kAiw] = 2.0 * s.s_iw * stefan_rate(s, ev.micro->interface_gradient, Up, p);
      ev.f[kAg] = -(p.rho_w - p.rho_i) / p.rho_i * ev.f[kAiw] + p.rho_w * Up / (wall_area * p.rho_i);
      break;
    }
  }
  ev.f[kQ] = -(p.N * Up + Urp) / (kPi * p.L_v);
  ev.f[kU] = Up;
  ev.f[kUr] = Urp;
  return ev;
}

struct Solve {
  Vec y;
  Eval ev;
};

// Backward Euler on y over h; nullopt if Newton does not converge.
std::optional<Solve> implicit_step(const Vec& yn, const CellState& base, double h,
                                   const CellModel& m, const IntegratorConfig& cfg,
                                   bool& floor_hit) {
  const Vec sc = scales(m.params);
  Vec y = yn;
  try {
    for (int it = 0; it < cfg.newton_max; ++it) {
      const Eval ev = evaluate(y, base, h, m);
      const Vec F = ((y - yn - h * ev.f).array() / sc.array()).matrix();

      Mat J = Mat::Identity();
      for (int j = 0; j < 5; ++j) {
        Vec yp = y;
        yp[j] += kFdStep * sc[j];
        const Eval evp = evaluate(yp, base, h, m);
        J.col(j) -= h * ((evp.f - ev.f).array() / sc.array()).matrix() / kFdStep;
      }
      const Vec dz = J.partialPivLu().solve(-F);
      if (!dz.allFinite()) return std::nullopt;
      y += (dz.array() * sc.array()).matrix();
      if (dz.lpNorm<Eigen::Infinity>() < kNewtonTol) {
        return Solve{y, evaluate(y, base, h, m)};
      }
    }
  } catch (const BubbleCollapse&) {
    floor_hit = true;
  } catch (const SolverError&) {
  }
  return std::nullopt;
}

enum class Crossing { none, ice_gone, water_gone };

Crossing crossing(const Vec& y, const CellState& s, const ModelParams& p) {
  if (!interface_active(s.tag)) return Crossing::none;
  if (y[kAiw] <= y[kAg]) return Crossing::ice_gone;
  if (y[kAiw] >= p.R_f * p.R_f) return Crossing::water_gone;
  return Crossing::none;
}

// Removes the remaining sliver of ice or water while conserving fibre water mass.
PhaseTag snap(Vec& y, Crossing c, PhaseTag tag, const ModelParams& p) {
  const double Rf2 = p.R_f * p.R_f;
  if (c == Crossing::ice_gone) {
    const double a = y[kAiw] - p.rho_i / p.rho_w * (y[kAiw] - y[kAg]);
    y[kAg] = y[kAiw] = a;
    if (tag.vessel == VesselState::thawed) tag.fiber = FiberState::thawed;
  } else {
    y[kAg] = Rf2 - (y[kAiw] - y[kAg]) - p.rho_w / p.rho_i * (Rf2 - y[kAiw]);
    y[kAiw] = Rf2;
    tag.fiber = FiberState::frozen;
  }
  return tag;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / scale; }

void reseed_micro(CellState& s, double T, const CellModel& m) {
  s.micro = make_profile(s.s_iw, m.geometry.R_gamma, m.params.T_c, T, m.sap_law, m.n_y);
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(rtol > 0 && atol > 0 && event_tol > 0 && cell_h_min > 0)) {
    throw ConfigError("integrator tolerances must be positive");
  }
  if (!(dt_min > 0 && dt_min <= dt_initial && dt_initial <= dt_max)) {
    throw ConfigError("integrator step bounds must satisfy 0 < dt_min <= dt_initial <= dt_max");
  }
  if (newton_max < 1) throw ConfigError("newton_max must be at least 1");
  if (cell_fixed_substep < 0) throw ConfigError("cell_fixed_substep must be non-negative");
}

const char* to_string(FiberState s) {
  switch (s) {
    case FiberState::frozen: return "frozen";
    case FiberState::thawing: return "thawing";
    case FiberState::thawed: return "thawed";
    case FiberState::freezing: return "freezing";
  }
  return "?";
}

const char* to_string(VesselState s) {
  return s == VesselState::frozen ? "frozen" : "thawed";
}

std::string to_string(PhaseTag tag) {
  return std::string(to_string(tag.fiber)) + "/" + to_string(tag.vessel);
}

bool is_admissible(PhaseTag tag) {
  if (tag.vessel == VesselState::thawed) return true;
  return tag.fiber == FiberState::frozen || tag.fiber == FiberState::freezing;
}

bool is_adjacent(FiberState from, FiberState to) {
  const auto next = [](FiberState s) {
    switch (s) {
      case FiberState::frozen: return FiberState::thawing;
      case FiberState::thawing: return FiberState::thawed;
      case FiberState::thawed: return FiberState::freezing;
      case FiberState::freezing: return FiberState::frozen;
    }
    return s;
  };
  return next(from) == to || next(to) == from;
}

double young_laplace_ice_pressure(const CellState& s, const ModelParams& p) {
  return 2.0 * p.sigma_iw / s.s_iw;
}

CellModel::CellModel(const ModelParams& p, double R_gamma)
    : params(p),
      geometry(CellGeometry::from(p, R_gamma)),
      fiber_law(EnthalpyLaw::fiber(p)),
      sap_law(EnthalpyLaw::sap(p)) {}

double gas_density(double mass, double V_g, double V_w, double H) {
  return mass / (V_g + H * V_w);
}

double liquid_pressure(double rho_g, double radius, const ModelParams& p) {
  return rho_g * p.Rgas * p.T_c / p.M_g - 2.0 * p.sigma_gw / radius;
}

double fiber_gas_rate(const CellState& s, double siw_rate, double U_rate, const ModelParams& p) {
  if (!(s.s_g > 1e-9)) throw BubbleCollapse("fiber gas radius below floor");
  return -(p.rho_w - p.rho_i) * s.s_iw * siw_rate / (p.rho_i * s.s_g) +
         p.rho_w * U_rate / (2.0 * kPi * p.L_f * p.rho_i * s.s_g);
}

double vessel_gas_rate(const CellState& s, double U_rate, double Ur_rate, const ModelParams& p) {
  if (!(s.r > 1e-9)) throw BubbleCollapse("vessel gas radius below floor");
  return -(p.N * U_rate + Ur_rate) / (2.0 * kPi * p.L_v * s.r);
}

double stefan_rate(const CellState& s, double grad_T, double U_rate, const ModelParams& p) {
  return -(p.k_w / p.rho_w) / p.latent_heat() * grad_T + U_rate / (2.0 * kPi * p.L_f * s.s_iw);
}

double wall_flux_rate(const CellState& s, const ModelParams& p, double p_ice) {
  if (s.tag.vessel == VesselState::frozen) return 0.0;
  return -(p.Lw * p.A_fv / p.N) * (s.p_w_v - s.p_w_f - p.C_s * p.Rgas * s.T + p_ice);
}

double wall_flux_rate(const CellState& s, const CellModel& m) {
  const bool suction =
      s.tag.fiber == FiberState::frozen && s.tag.vessel == VesselState::thawed && m.ice_pressure;
  return wall_flux_rate(s, m.params, suction ? m.ice_pressure(s, m.params) : 0.0);
}

double root_flux_rate(const CellState& s, const ModelParams& p) {
  if (s.tag.vessel == VesselState::frozen) return 0.0;
  const double dp = s.p_w_v - p.p_soil;
  const double C_r = dp <= 0.0 ? p.Cr_in : p.Cr_out;
  return -C_r * (p.Lr * p.A_r * dp);
}

GasState vessel_pressure(const CellState& s, const ModelParams& p) {
  const double V_g = kPi * p.L_v * s.r * s.r;
  const double V_w = kPi * p.L_v * (p.R_v * p.R_v - s.r * s.r);
  GasState g;
  g.rho_g = gas_density(s.gas_mass_v, V_g, V_w, p.H);
  g.p_w = liquid_pressure(g.rho_g, s.r, p);
  return g;
}

GasState fiber_pressure(const CellState& s, const ModelParams& p) {
  const double V_g = kPi * p.L_f * s.s_g * s.s_g;
  const double V_w = kPi * p.L_f * (p.R_f * p.R_f - s.s_iw * s.s_iw);
  GasState g;
  g.rho_g = gas_density(s.gas_mass_f, V_g, V_w, p.H);
  g.p_w = liquid_pressure(g.rho_g, s.s_g, p);
  return g;
}

double fiber_mass_invariant(const CellState& s, const ModelParams& p) {
  const double a_g = s.s_g * s.s_g, a_iw = s.s_iw * s.s_iw;
  return kPi * p.L_f * (p.rho_i * (a_iw - a_g) + p.rho_w * (p.R_f * p.R_f - a_iw)) + p.rho_w * s.U;
}

double vessel_volume_invariant(const CellState& s, const ModelParams& p) {
  return kPi * p.L_v * s.r * s.r + p.N * s.U + s.U_r;
}

CellState initial_cell(const CellModel& m, double T0) {
  const ModelParams& p = m.params;
  CellState s;
  s.r = p.R_v * std::sqrt(p.vessel_gas0);
  s.s_g = s.s_iw = p.fiber_gas0 * p.R_f;
  s.T = T0;
  s.tag = PhaseTag{};

  const double rho_v = (p.p_soil + 2.0 * p.sigma_gw / s.r) * p.M_g / (p.Rgas * p.T_c);
  const double p_f = p.p_soil - p.C_s * p.Rgas * T0;
  const double rho_f = (p_f + 2.0 * p.sigma_gw / s.s_g) * p.M_g / (p.Rgas * p.T_c);
  if (!(rho_v > 0.0 && rho_f > 0.0)) {
    throw ConfigError("initial gas densities are non-positive; check p_soil and gamma_s");
  }
  s.gas_mass_v = rho_v * (kPi * p.L_v * s.r * s.r + p.H * kPi * p.L_v * (p.R_v * p.R_v - s.r * s.r));
  s.gas_mass_f =
      rho_f * (kPi * p.L_f * s.s_g * s.s_g + p.H * kPi * p.L_f * (p.R_f * p.R_f - s.s_iw * s.s_iw));
  refresh_gas(s, p);
  reseed_micro(s, T0, m);
  return s;
}

int apply_temperature_transitions(CellState& s, double T, const CellModel& m) {
  const ModelParams& p = m.params;
  int forced = 0;
  const auto set_fiber = [&](FiberState to) {
    if (!is_adjacent(s.tag.fiber, to)) ++forced;
    const bool was_active = interface_active(s.tag);
    s.tag.fiber = to;
    if (interface_active(s.tag) && !was_active) reseed_micro(s, T, m);
  };

  if (T > p.T_c_sap) s.tag.vessel = VesselState::thawed;

  switch (s.tag.fiber) {
    case FiberState::thawed:
      if (T < m.fiber_freeze_threshold()) set_fiber(FiberState::freezing);
      break;
    case FiberState::frozen:
      if (T > m.fiber_thaw_threshold() && s.tag.vessel == VesselState::thawed) {
        set_fiber(FiberState::thawing);
      }
      break;
    case FiberState::thawing:
      if (T < m.fiber_freeze_threshold()) set_fiber(FiberState::freezing);
      break;
    case FiberState::freezing:
      if (T > m.fiber_thaw_threshold()) set_fiber(FiberState::thawing);
      break;
  }

  if (T < p.T_c_sap && s.tag.vessel == VesselState::thawed) {
    if (s.tag.fiber == FiberState::thawed || s.tag.fiber == FiberState::thawing) {
      set_fiber(FiberState::freezing);
    }
    s.tag.vessel = VesselState::frozen;
  }
  s.forced_transitions += forced;
  return forced;
}

void CellStepStats::merge(const CellStepStats& o) {
  substeps += o.substeps;
  rejected += o.rejected;
  events += o.events;
  forced += o.forced;
  fiber_residual = std::max(fiber_residual, o.fiber_residual);
  vessel_residual = std::max(vessel_residual, o.vessel_residual);
  gas_residual = std::max(gas_residual, o.gas_residual);
}

CellState step_cell(const CellState& state, double macro_T, double dt, const CellModel& m,
                    const IntegratorConfig& cfg, CellStepStats* stats) {
  const ModelParams& p = m.params;
  CellStepStats local;
  CellState s = state;
  s.T = macro_T;
  local.forced += apply_temperature_transitions(s, macro_T, m);
  refresh_gas(s, p);

  const bool fixed = cfg.cell_fixed_substep > 0.0;
  const Vec sc = scales(p);
  const double fiber_scale = p.rho_w * kPi * p.R_f * p.R_f * p.L_f;
  const double vessel_scale = kPi * p.R_v * p.R_v * p.L_v;

  long event_forced = 0;
  double t = 0.0;
  double h = fixed ? cfg.cell_fixed_substep : std::clamp(s.h_next, cfg.cell_h_min, std::max(dt, cfg.cell_h_min));
  Vec yn = to_vector(s);
  std::optional<Eval> fn;

  const bool frozen_solid =
      s.tag.fiber == FiberState::frozen && s.tag.vessel == VesselState::frozen;
  while (!frozen_solid && dt - t > 1e-12 * dt) {
    if (s.tag.fiber == FiberState::frozen && s.tag.vessel == VesselState::frozen) break;
    if (!fn) fn = evaluate(yn, s, 0.0, m);
    const double h_try = std::min(h, dt - t);

    bool floor_hit = false;
    auto sol = implicit_step(yn, s, h_try, m, cfg, floor_hit);
    if (!sol) {
      ++local.rejected;
      h = h_try * 0.25;
      if (h < cfg.cell_h_min) {
        if (floor_hit) throw BubbleCollapse("gas bubble collapsed at cell time " + std::to_string(t));
        throw SolverError("cell Newton iteration failed at cell time " + std::to_string(t) +
                          " with substep " + std::to_string(h_try));
      }
      continue;
    }

    double err = 0.0;
    if (!fixed) {
      err = (0.5 * h_try * (sol->ev.f - fn->f).array() / (cfg.rtol * sc.array()))
                .abs()
                .maxCoeff();
      if (err > 1.0) {
        ++local.rejected;
        h = h_try * std::max(0.2, 0.9 / std::sqrt(err));
        if (h < cfg.cell_h_min) {
          throw SolverError("cell substep underflow at cell time " + std::to_string(t));
        }
        continue;
      }
    }

    double h_acc = h_try;
    Crossing c = crossing(sol->y, s, p);
    if (c != Crossing::none) {
      double lo = 0.0, hi = h_try;
      while (hi - lo > cfg.event_tol) {
        const double mid = 0.5 * (lo + hi);
        bool fh = false;
        auto trial = implicit_step(yn, s, mid, m, cfg, fh);
        if (trial && crossing(trial->y, s, p) == Crossing::none) {
          lo = mid;
        } else {
          hi = mid;
          if (trial) {
            sol = trial;
            c = crossing(trial->y, s, p);
          }
        }
      }
      h_acc = hi;
    }

    const CellState before = s;
    Vec y = sol->y;
    if (sol->ev.micro) s.micro = sol->ev.micro->profile;
    if (c != Crossing::none) {
      const PhaseTag to = snap(y, c, s.tag, p);
      if (!is_adjacent(s.tag.fiber, to.fiber) && to.fiber != s.tag.fiber) {
        ++local.forced;
        ++event_forced;
      }
      s.tag = to;
      ++local.events;
    }
    assign(s, y, m);

    local.fiber_residual = std::max(
        local.fiber_residual,
        rel(fiber_mass_invariant(s, p), fiber_mass_invariant(before, p), fiber_scale));
    local.vessel_residual = std::max(
        local.vessel_residual,
        rel(vessel_volume_invariant(s, p), vessel_volume_invariant(before, p), vessel_scale));
    const double Vgf = kPi * p.L_f * s.s_g * s.s_g;
    const double Vwf = kPi * p.L_f * (p.R_f * p.R_f - s.s_iw * s.s_iw);
    const double Vgv = kPi * p.L_v * s.r * s.r;
    const double Vwv = kPi * p.L_v * (p.R_v * p.R_v - s.r * s.r);
    local.gas_residual = std::max(
        {local.gas_residual, rel(s.rho_g_f * (Vgf + p.H * Vwf), s.gas_mass_f, s.gas_mass_f),
         rel(s.rho_g_v * (Vgv + p.H * Vwv), s.gas_mass_v, s.gas_mass_v)});

    ++local.substeps;
    t += h_acc;
    yn = y;
    if (c != Crossing::none) {
      fn.reset();
    } else {
      fn = sol->ev;
    }
    if (!fixed) h = h_try * std::min(4.0, std::max(0.2, 0.9 / std::sqrt(std::max(err, 1e-8))));
  }

  if (!fixed) s.h_next = std::max(h, cfg.cell_h_min);
  s.forced_transitions += static_cast<int>(event_forced);
  if (stats) stats->merge(local);
  return s;
}

GammaSource gamma_source(const CellState& s, const CellModel& m) {
  GammaSource g;
  if (!interface_active(s.tag)) return g;
  const MicroHeatResult r = micro_gradients(s.micro, m.sap_law);
  const Eigen::Index n = s.micro.size();
  g.slope = -2.0 * kPi * r.gamma_conductance / m.geometry.area_Y1;
  g.T_ref = omega(s.micro.enthalpy[n - 2], m.sap_law);
  return g;
}

}  // namespace sapflow
