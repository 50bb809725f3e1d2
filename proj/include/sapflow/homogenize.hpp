#pragma once

#include <Eigen/Core>

namespace sapflow {

/// Uniform n x n finite-volume grid on the periodic unit square with a
/// centred circular inclusion of radius `ratio` removed. Cut cells carry
/// their exact open area and face fractions.
struct CellProblemMesh {
  int n = 0;
  double ratio = 0;
  double h = 0;
  Eigen::VectorXd area_fraction;  ///< open fraction of each cell, index i + n*j
  Eigen::VectorXd face_east;      ///< open fraction of the face between (i,j) and (i+1,j)
  Eigen::VectorXd face_north;     ///< open fraction of the face between (i,j) and (i,j+1)

  int index(int i, int j) const { return ((i + n) % n) + n * ((j + n) % n); }
  /// Exact area of the open region, 1 - pi ratio^2.
  double open_area() const;
  /// Number of cells cut by the inclusion boundary.
  int cut_cells() const;
};

inline constexpr int kDefaultCellMesh = 128;

CellProblemMesh make_cell_mesh(double ratio, int n = kDefaultCellMesh);

struct CellSolveInfo {
  int iterations = 0;
  double residual = 0;  ///< max-norm residual of the discrete operator
};

/// Corrector mu for unit macro gradient along `direction` (0 = x, 1 = y),
/// normalized to zero area-weighted mean. Entries of closed cells are 0.
Eigen::VectorXd solve_cell_problem(const CellProblemMesh& mesh, int direction,
                                   CellSolveInfo* info = nullptr);

/// Max-norm residual of the discrete cell operator for a given mu.
double cell_problem_residual(const CellProblemMesh& mesh, const Eigen::VectorXd& mu,
                             int direction);

/// Pi_ij = (1/|Y1|) int_{Y1} (delta_ij + d_j mu_i).
Eigen::Matrix2d assemble_pi(const CellProblemMesh& mesh, const Eigen::VectorXd& mu_x,
                            const Eigen::VectorXd& mu_y);

/// Pi_11 of an isotropic tensor; throws SolverError if the diagonal entries
/// differ by more than 1% or off-diagonals exceed 1% of the diagonal.
double effective_radial_coefficient(const Eigen::Matrix2d& Pi);

/// Solves both cell problems and returns Pi.
Eigen::Matrix2d homogenized_tensor(double ratio, int n = kDefaultCellMesh);

/// effective_radial_coefficient(homogenized_tensor(ratio, n)), computed once
/// per (ratio, n) and cached for the process lifetime.
double cached_pi_hat(double ratio, int n = kDefaultCellMesh);

}  // namespace sapflow
