#pragma once

#include <set>
#include <string>

#include "sapflow/config.hpp"

namespace sapflow {

inline constexpr double kKelvinOffset = 273.15;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double celsius_to_kelvin(double c) { return c + kKelvinOffset; }
inline constexpr double kelvin_to_celsius(double k) { return k - kKelvinOffset; }

/// Physical constants and tree parameters for one simulation, SI units,
/// temperatures in Kelvin. Built only through build_params(), which fills the
/// derived block; treat as immutable afterwards.
struct ModelParams {
  // geometry
  double R_tree = 0.07;    ///< stem radius [m]
  double R_sap = 0.0;      ///< heartwood radius [m]
  double R_f = 3.5e-6;     ///< fiber inner radius [m]
  double R_v = 2.0e-5;     ///< vessel inner radius [m]
  double L_f = 1.0e-3;     ///< fiber length [m]
  double L_v = 5.0e-4;     ///< vessel element length [m]
  double N = 16.0;         ///< fibers per vessel
  double A_tree = 14.0;    ///< total root area [m^2]

  // hydraulics
  double Lw = 5.54e-13;    ///< fiber-vessel wall conductivity [m s^-1 Pa^-1]
  double Lr = 2.7e-16;     ///< root conductivity [m s^-1 Pa^-1]
  double Cr_in = 1.0;      ///< root reflection coefficient, inflow
  double Cr_out = 0.2;     ///< root reflection coefficient, outflow
  double p_soil = 2.03e5;  ///< soil water pressure [Pa]

  // solutes and gas
  double gamma_s = 0.03;   ///< sap sugar mass fraction
  double M_s = 0.3423;     ///< sucrose molar mass [kg/mol]
  double M_g = 0.029;      ///< air molar mass [kg/mol]
  double H = 0.0274;       ///< Henry's constant (dimensionless)
  double K_b = 1.853;      ///< cryoscopic constant [kg K/mol]
  double Rgas = 8.314;     ///< gas constant [J/(K mol)]

  // water phases
  double c_i = 2100.0, c_w = 4180.0;   ///< specific heats [J/(K kg)]
  double c_inf = 1.0e7;                ///< enthalpy regularization [J/(K kg)]
  double E_i = 574.0e3, E_w = 907.0e3; ///< phase enthalpies at melting [J/kg]
  double k_i = 2.22, k_w = 0.556;      ///< conductivities [W/(m K)]
  double rho_i = 917.0, rho_w = 1000.0;
  double sigma_iw = 0.033, sigma_gw = 0.076;  ///< surface tensions [N/m]
  double T_c = 273.15;                 ///< pure water melting point [K]

  // initial state
  double fiber_gas0 = 0.9;    ///< initial s_g / R_f
  double vessel_gas0 = 0.05;  ///< initial vessel gas volume fraction

  // derived (recomputed by build_params)
  double theta = 0.0;      ///< R_sap / R_tree
  double A_fv = 0.0;       ///< fiber-vessel wall area 2 pi R_v L_v [m^2]
  double A_r = 0.0;        ///< root area per vessel [m^2]
  double C_s = 0.0;        ///< sugar concentration [mol/m^3]
  double T_c_sap = 0.0;    ///< sap melting point [K]
  double eps = 0.0;        ///< reference cell side [m]
  double delta_i = 0.0, delta_w = 0.0;  ///< mush half-widths [J/kg]

  double latent_heat() const { return E_w - E_i; }
};

/// Freezing point depression K_b * gamma_s / M_s [K].
double fpd(double gamma_s, double K_b = 1.853, double M_s = 0.3423);

/// Table-1 base case.
ModelParams base_params();

/// Builds parameters from a key-value set. Missing keys fall back to the base
/// case; derived keys, if present, must agree with the recomputed value.
/// Temperatures in the config (`T_c`, `T_c_sap`) are in degrees Celsius.
ModelParams build_params(const KeyValueConfig& raw);

/// Recompute derived quantities and validate; used by build_params.
ModelParams finalize_params(ModelParams p);

/// Serializes every field (primitives then derived) so build_params can read it back.
KeyValueConfig to_config(const ModelParams& p);

/// Keys understood by build_params.
const std::set<std::string>& param_keys();

}  // namespace sapflow
