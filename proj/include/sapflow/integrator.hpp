#pragma once

namespace sapflow {

/// Time-integration settings shared by the macro solver and the per-cell
/// micro integrator.
struct IntegratorConfig {
  double rtol = 1e-4;
  double atol = 1.0;          ///< absolute enthalpy tolerance for the macro step [J/kg]
  double dt_min = 1e-4;       ///< smallest macro step before aborting [s]
  double dt_max = 300.0;      ///< largest macro step [s]
  double dt_initial = 1.0;    ///< first macro step [s]
  int newton_max = 20;
  double event_tol = 1e-3;    ///< phase-event localization [s]
  double cell_h_min = 1e-8;   ///< smallest micro substep [s]
  /// If positive, the micro integrator takes fixed substeps of this size.
  double cell_fixed_substep = 0.0;

  /// Throws ConfigError on non-positive tolerances or unordered bounds.
  void validate() const;
};

}  // namespace sapflow
