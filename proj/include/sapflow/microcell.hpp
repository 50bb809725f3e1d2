#pragma once

#include <functional>
#include <string>

#include "sapflow/enthalpy.hpp"
#include "sapflow/integrator.hpp"
#include "sapflow/micro_heat.hpp"
#include "sapflow/params.hpp"

namespace sapflow {

enum class FiberState { frozen, thawing, thawed, freezing };
enum class VesselState { frozen, thawed };

struct PhaseTag {
  FiberState fiber = FiberState::thawed;
  VesselState vessel = VesselState::thawed;

  friend bool operator==(const PhaseTag&, const PhaseTag&) = default;
};

const char* to_string(FiberState s);
const char* to_string(VesselState s);
std::string to_string(PhaseTag tag);

/// The six fibre/vessel combinations the model allows (thawing/frozen and
/// thawed/frozen are excluded).
bool is_admissible(PhaseTag tag);

/// Neighbours on the cycle frozen -> thawing -> thawed -> freezing -> frozen.
bool is_adjacent(FiberState from, FiberState to);

/// True while the fibre has a moving ice-water interface.
inline bool interface_active(PhaseTag tag) {
  return tag.fiber == FiberState::thawing || tag.fiber == FiberState::freezing;
}

struct CellState {
  double s_g = 0, s_iw = 0, r = 0;  ///< fibre gas, fibre ice-water, vessel gas radii [m]
  double U = 0, U_r = 0;            ///< cumulative wall and root volumes [m^3]
  double rho_g_f = 0, rho_g_v = 0;  ///< gas densities [kg/m^3]
  double p_w_f = 0, p_w_v = 0;      ///< liquid pressures [Pa]
  double T = 0;                     ///< macro temperature last applied [K]
  MicroProfile micro;
  PhaseTag tag;

  /// Free plus dissolved gas, rho_g (V_g + H V_w), fixed at t = 0 [kg].
  double gas_mass_f = 0, gas_mass_v = 0;
  double h_next = 1.0;              ///< substep hint carried between steps [s]
  int forced_transitions = 0;
};

struct CellModel;

/// p_ice for the frozen-fibre / thawed-vessel state.
using IcePressureModel = std::function<double(const CellState&, const ModelParams&)>;

/// 2 sigma_iw / s_iw.
double young_laplace_ice_pressure(const CellState& s, const ModelParams& p);

struct CellModel {
  ModelParams params;
  CellGeometry geometry;
  EnthalpyLaw fiber_law, sap_law;
  IcePressureModel ice_pressure = young_laplace_ice_pressure;
  int n_y = kDefaultMicroNodes;
  double radius_floor = 1e-9;         ///< bubble-collapse threshold on s_g and r [m]

  explicit CellModel(const ModelParams& p, double R_gamma = 0.0);

  double fiber_freeze_threshold() const { return fiber_law.T_low(); }
  double fiber_thaw_threshold() const { return fiber_law.T_high(); }
};

struct GasState {
  double p_w = 0;    ///< liquid pressure [Pa]
  double rho_g = 0;  ///< gas density [kg/m^3]
};

/// rho = mass / (V_g + H V_w).
double gas_density(double mass, double V_g, double V_w, double H);

/// rho_g R T_c / M_g - 2 sigma_gw / radius.
double liquid_pressure(double rho_g, double radius, const ModelParams& p);

// Rates of the cell model. Radii in metres, volumes in m^3, times in seconds.
double fiber_gas_rate(const CellState& s, double siw_rate, double U_rate, const ModelParams& p);
double vessel_gas_rate(const CellState& s, double U_rate, double Ur_rate, const ModelParams& p);
double stefan_rate(const CellState& s, double grad_T, double U_rate, const ModelParams& p);
/// Wall flux with an explicit ice-pressure term; zero when the vessel is frozen.
double wall_flux_rate(const CellState& s, const ModelParams& p, double p_ice);
/// Wall flux with p_ice from the model's closure in the frozen/thawed state, 0 otherwise.
double wall_flux_rate(const CellState& s, const CellModel& m);
/// Root flux with the check-valve reflection coefficient; zero when the vessel is frozen.
double root_flux_rate(const CellState& s, const ModelParams& p);

GasState vessel_pressure(const CellState& s, const ModelParams& p);
GasState fiber_pressure(const CellState& s, const ModelParams& p);

/// pi L_f [rho_i (s_iw^2 - s_g^2) + rho_w (R_f^2 - s_iw^2)] + rho_w U [kg].
double fiber_mass_invariant(const CellState& s, const ModelParams& p);
/// pi L_v r^2 + N U + U_r [m^3].
double vessel_volume_invariant(const CellState& s, const ModelParams& p);

/// Fully thawed cell at uniform temperature T0 with p_w_v = p_soil and zero wall flux.
CellState initial_cell(const CellModel& m, double T0);

/// Applies tag changes driven by the macro temperature. Returns the number
/// of forced (non-adjacent) fibre transitions.
int apply_temperature_transitions(CellState& s, double T, const CellModel& m);

struct CellStepStats {
  long substeps = 0;
  long rejected = 0;
  long events = 0;
  long forced = 0;
  double fiber_residual = 0;   ///< max relative per-substep change of fiber_mass_invariant
  double vessel_residual = 0;  ///< same for vessel_volume_invariant
  double gas_residual = 0;     ///< max relative mismatch of rho_g (V_g + H V_w) against the t=0 mass

  void merge(const CellStepStats& o);
};

/// Advances one cell over dt with the macro temperature frozen at macro_T.
CellState step_cell(const CellState& state, double macro_T, double dt, const CellModel& m,
                    const IntegratorConfig& cfg, CellStepStats* stats = nullptr);

/// Macro source of the cell as an affine function of the Gamma temperature,
/// S(T) = slope * (T - T_ref), with the interior micro node frozen.
struct GammaSource {
  double slope = 0;
  double T_ref = 0;

  double operator()(double T) const { return slope * (T - T_ref); }
};
GammaSource gamma_source(const CellState& s, const CellModel& m);

}  // namespace sapflow
