#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "sapflow/integrator.hpp"
#include "sapflow/microcell.hpp"

namespace sapflow {

/// Everything the macro solver needs besides the evolving field.
struct StemModel {
  ModelParams params;
  CellModel cell;
  EnthalpyLaw sap_law;
  double pi_hat = 1.0;
  bool micro = true;  ///< false: pure conduction, no micro cells or sources

  /// pi_hat from the homogenized cell problem of the model's geometry.
  explicit StemModel(const ModelParams& p, double R_gamma = 0.0, int cell_mesh = 128);
  StemModel(const ModelParams& p, double pi_hat, bool micro, double R_gamma = 0.0);
};

struct GridRule {
  int min_cells = 25;
  int max_cells = 50;
  double target_dx = 0.003;  ///< preferred spacing [m]
  double limit_dx = 0.004;   ///< spacing that forces extra cells past max_cells [m]
  int hard_cap = 100;
};

/// Cell count for an annulus of the given width under `rule`.
int choose_cell_count(double width, const GridRule& rule = {});

struct MacroField {
  Eigen::VectorXd x;      ///< cell centres [m]
  Eigen::VectorXd faces;  ///< n+1 face radii [m]
  Eigen::VectorXd E, T;   ///< macro enthalpy [J/kg] and temperature [K]
  double dx = 0;
  double pi_hat = 1;
  std::vector<CellState> cells;
  double time = 0;

  Eigen::Index size() const { return x.size(); }
  /// Ring measure (x_{j+1/2}^2 - x_{j-1/2}^2)/2, proportional to annulus area.
  Eigen::VectorXd ring_weights() const;
};

MacroField build_grid(const StemModel& model, double T0, const GridRule& rule = {});
MacroField build_grid(const StemModel& model, double T0, int n_cells);

/// dE/dt per cell for temperature-affine micro sources `src` (empty: none).
Eigen::VectorXd macro_rhs(const Eigen::VectorXd& E, const MacroField& field, double T_ambient,
                          const StemModel& model, const std::vector<GammaSource>& src);
Eigen::VectorXd macro_rhs(const MacroField& field, double T_ambient, const StemModel& model);

/// Heat entering through the outer face, per radian and unit height divided by density.
double boundary_flux(const Eigen::VectorXd& E, const MacroField& field, double T_ambient,
                     const StemModel& model);

/// Ring-weighted average over the annulus of per-cell values.
double ring_average(const MacroField& field, const Eigen::VectorXd& values);
double stem_average_pressure(const MacroField& field);
/// Total root uptake volume: sum of U_r times the number of reference cells in each ring.
double total_root_uptake(const MacroField& field, const ModelParams& p);

struct Snapshot {
  double time = 0;
  Eigen::VectorXd T;
  Eigen::VectorXd p_w_v;
  double pbar = 0;    ///< absolute stem-averaged vessel pressure [Pa]
  double uptake = 0;  ///< total root uptake [m^3]
};

struct RunDiagnostics {
  long steps = 0;
  long rejected = 0;
  long newton_iterations = 0;
  double min_dt = 0;
  double max_dt = 0;
  double energy_residual = 0;  ///< max relative FV energy-balance defect of accepted steps
  CellStepStats cells;
};

struct Trajectory {
  std::vector<Snapshot> samples;
  RunDiagnostics diag;
};

using AmbientSignal = std::function<double(double)>;  ///< time [s] -> temperature [K]

/// Lie-split integration to t_end with samples at multiples of `cadence`
/// (relative to the start time), the start included.
Trajectory advance(MacroField& field, const StemModel& model, const AmbientSignal& ambient,
                   double t_end, const IntegratorConfig& cfg, double cadence);

}  // namespace sapflow
