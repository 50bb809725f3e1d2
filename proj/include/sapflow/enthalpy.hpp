#pragma once

#include <concepts>

#include <Eigen/Core>

#include "sapflow/params.hpp"

namespace sapflow {

/// Regularized temperature-enthalpy law with a steep mushy layer of slope
/// 1/c_inf centred on `T_crit`.
///
/// The ice enthalpy is anchored at E_i = c_i * T_crit so that the ice branch
/// T = E/c_i meets the mushy branch continuously, and E_w = E_i + latent heat.
/// The same construction serves pure fibre water (T_crit = T_c) and sugary
/// sap (T_crit = T_c_sap).
struct EnthalpyLaw {
  double c_i = 0, c_w = 0, c_inf = 0;
  double E_i = 0, E_w = 0;
  double delta_i = 0, delta_w = 0;
  double T_crit = 0;
  double D_ice = 0, D_water = 0;  ///< k/rho on either side of the mush

  static EnthalpyLaw with_critical(const ModelParams& p, double T_crit);
  static EnthalpyLaw fiber(const ModelParams& p) { return with_critical(p, p.T_c); }
  static EnthalpyLaw sap(const ModelParams& p) { return with_critical(p, p.T_c_sap); }

  double mush_low() const { return E_i - delta_i; }
  double mush_high() const { return E_w + delta_w; }
  double mush_mid() const { return 0.5 * (E_i + E_w); }
  /// Temperatures bounding the mushy branch.
  double T_low() const { return T_crit - delta_i / c_i; }
  double T_high() const { return T_crit + delta_w / c_w; }
};

/// T = omega(E).
template <std::floating_point Scalar>
Scalar omega(Scalar E, const EnthalpyLaw& law) {
  if (E < law.mush_low()) return law.T_crit + (E - law.E_i) / law.c_i;
  if (E <= law.mush_high()) return law.T_crit + (2 * E - law.E_i - law.E_w) / (2 * law.c_inf);
  return law.T_crit + (E - law.E_w) / law.c_w;
}

/// Pseudo-inverse of omega; the mush midpoint at T = T_crit.
template <std::floating_point Scalar>
Scalar omega_inv(Scalar T, const EnthalpyLaw& law) {
  if (T < law.T_low()) return law.E_i + law.c_i * (T - law.T_crit);
  if (T <= law.T_high()) return law.mush_mid() + law.c_inf * (T - law.T_crit);
  return law.E_w + law.c_w * (T - law.T_crit);
}

/// dT/dE on the branch containing E.
template <std::floating_point Scalar>
Scalar omega_slope(Scalar E, const EnthalpyLaw& law) {
  if (E < law.mush_low()) return Scalar(1) / law.c_i;
  if (E <= law.mush_high()) return Scalar(1) / law.c_inf;
  return Scalar(1) / law.c_w;
}

/// Conduction coefficient k/rho, blended linearly across [E_i, E_w].
template <std::floating_point Scalar>
Scalar diffusivity(Scalar E, const EnthalpyLaw& law) {
  if (E < law.E_i) return Scalar(law.D_ice);
  if (E <= law.E_w) {
    return law.D_ice + (E - law.E_i) / (law.E_w - law.E_i) * (law.D_water - law.D_ice);
  }
  return Scalar(law.D_water);
}

template <typename Derived>
auto omega(const Eigen::ArrayBase<Derived>& E, const EnthalpyLaw& law) {
  using Scalar = typename Derived::Scalar;
  return E.unaryExpr([&law](Scalar e) { return omega(e, law); });
}

template <typename Derived>
auto omega_inv(const Eigen::ArrayBase<Derived>& T, const EnthalpyLaw& law) {
  using Scalar = typename Derived::Scalar;
  return T.unaryExpr([&law](Scalar t) { return omega_inv(t, law); });
}

template <typename Derived>
auto diffusivity(const Eigen::ArrayBase<Derived>& E, const EnthalpyLaw& law) {
  using Scalar = typename Derived::Scalar;
  return E.unaryExpr([&law](Scalar e) { return diffusivity(e, law); });
}

}  // namespace sapflow
