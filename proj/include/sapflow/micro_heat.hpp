#pragma once

#include <Eigen/Core>

#include "sapflow/enthalpy.hpp"
#include "sapflow/params.hpp"

namespace sapflow {

/// Reference-cell geometry seen by the micro heat problem: the cell side, the
/// radius of the artificial boundary Gamma and the area of the fast region Y1
/// outside it.
struct CellGeometry {
  double eps = 0;
  double R_gamma = 0;
  double area_Y1 = 0;

  /// `R_gamma <= 0` selects the default eps/2 - R_f.
  static CellGeometry from(const ModelParams& p, double R_gamma = 0.0);
};

/// Radial enthalpy samples on the liquid subregion between the phase
/// boundary (first node) and Gamma (last node).
struct MicroProfile {
  Eigen::VectorXd radius;
  Eigen::VectorXd enthalpy;

  Eigen::Index size() const { return radius.size(); }
};

inline constexpr int kDefaultMicroNodes = 6;

/// Uniformly spaced nodes on [inner, outer] with temperature T_inner at the
/// first node and T_outer elsewhere.
MicroProfile make_profile(double inner, double outer, double T_inner, double T_outer,
                          const EnthalpyLaw& law, int n = kDefaultMicroNodes);

struct MicroHeatResult {
  MicroProfile profile;
  /// dT/dy at the phase boundary, outward from the ice [K/m].
  double interface_gradient = 0;
  /// Conductance-weighted boundary difference at Gamma, equal to R_gamma * D * dT/dy
  /// on the steady profile [W m / kg].
  double gamma_flux = 0;
  /// Per-radian conductance of the last segment; the Gamma flux is
  /// gamma_conductance * (T_gamma - T_{n-2}).
  double gamma_conductance = 0;
  int iterations = 0;
};

/// Evaluates interface gradient and Gamma flux of a profile without stepping.
MicroHeatResult micro_gradients(const MicroProfile& profile, const EnthalpyLaw& law);

/// One backward-Euler step of c_w dT/dt = (1/y) d/dy(y D dT/dy) on
/// [inner_radius, outer_radius] with T = T_inner at the first node and
/// T = T_gamma at the last. Nodes are respaced uniformly and the old profile
/// is carried over by linear interpolation in y.
MicroHeatResult micro_heat_step(const MicroProfile& profile, double inner_radius,
                                double outer_radius, double T_inner, double T_gamma, double dt,
                                const EnthalpyLaw& law, double c_w);

/// Macro source per unit mass, -(2 pi / |Y1|) * gamma_flux. Negative when the
/// cell draws heat from the macro scale.
double gamma_flux_integral(const MicroHeatResult& res, const CellGeometry& geo);
double gamma_flux_integral(double gamma_flux, const CellGeometry& geo);

/// Integral of c_w T over the annulus per radian, used by energy audits.
double micro_energy(const MicroProfile& profile, const EnthalpyLaw& law, double c_w);

}  // namespace sapflow
