#include "sapflow/homogenize.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "sapflow/errors.hpp"
#include "sapflow/params.hpp"

namespace sapflow {

namespace {

// Disk of radius R centred at the origin.
double half_chord(double x, double R) {
  return std::abs(x) >= R ? 0.0 : std::sqrt(R * R - x * x);
}

// Antiderivative of half_chord on [-R, R].
double chord_integral(double x, double R) {
  x = std::clamp(x, -R, R);
  return 0.5 * (x * std::sqrt(std::max(0.0, R * R - x * x)) + R * R * std::asin(x / R));
}

// int_{x0}^{x1} clamp(y, -c(x), c(x)) dx
double clamped_integral(double x0, double x1, double y, double R) {
  std::array<double, 6> cuts{x0, x1, -R, R, 0.0, 0.0};
  int m = 4;
  if (std::abs(y) < R) {
    const double xs = std::sqrt(R * R - y * y);
    cuts[m++] = -xs;
    cuts[m++] = xs;
  }
  std::sort(cuts.begin(), cuts.begin() + m);
  double total = 0.0;
  for (int k = 0; k + 1 < m; ++k) {
    const double a = std::max(cuts[k], x0), b = std::min(cuts[k + 1], x1);
    if (b <= a) continue;
    const double mid = 0.5 * (a + b);
    const double c = half_chord(mid, R);
    if (c <= std::abs(y)) {
      total += std::copysign(chord_integral(b, R) - chord_integral(a, R), y);
    } else {
      total += y * (b - a);
    }
  }
  return total;
}

double disk_rect_area(double x0, double x1, double y0, double y1, double R) {
  if (R <= 0.0) return 0.0;
  return clamped_integral(x0, x1, y1, R) - clamped_integral(x0, x1, y0, R);
}

// Length of [a, b] (along the face) outside the disk, face at fixed coordinate c.
double open_length(double c, double a, double b, double R) {
  const double hc = half_chord(c, R);
  const double overlap = std::max(0.0, std::min(b, hc) - std::max(a, -hc));
  return (b - a) - overlap;
}

struct Operator {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd b;
  std::vector<int> active;  // grid index of each unknown
  std::vector<int> slot;    // unknown index of each grid cell, -1 if closed
};

Operator build_operator(const CellProblemMesh& mesh, int direction) {
  const int n = mesh.n;
  Operator op;
  op.slot.assign(static_cast<std::size_t>(n) * n, -1);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = mesh.index(i, j);
      const double g = mesh.face_east[c] + mesh.face_north[c] + mesh.face_east[mesh.index(i - 1, j)] +
                       mesh.face_north[mesh.index(i, j - 1)];
      if (g > 0.0) {
        op.slot[c] = static_cast<int>(op.active.size());
        op.active.push_back(c);
      }
    }
  }
  const int m = static_cast<int>(op.active.size());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(m) * 5);
  op.b = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = mesh.index(i, j);
      const std::array<std::pair<int, double>, 2> faces{
          std::pair{mesh.index(i + 1, j), mesh.face_east[c]},
          std::pair{mesh.index(i, j + 1), mesh.face_north[c]}};
      for (int d = 0; d < 2; ++d) {
        const auto [nb, beta] = faces[d];
        if (beta <= 0.0) continue;
        const int p = op.slot[c], q = op.slot[nb];
        trips.emplace_back(p, p, beta);
        trips.emplace_back(q, q, beta);
        trips.emplace_back(p, q, -beta);
        trips.emplace_back(q, p, -beta);
        if (d == direction) {
          // Flux of the unit gradient leaves c and enters nb.
          op.b[p] += beta * mesh.h;
          op.b[q] -= beta * mesh.h;
        }
      }
    }
  }
  op.A.resize(m, m);
  op.A.setFromTriplets(trips.begin(), trips.end());
  return op;
}

}  // namespace

double CellProblemMesh::open_area() const { return 1.0 - kPi * ratio * ratio; }

int CellProblemMesh::cut_cells() const {
  int count = 0;
  for (Eigen::Index k = 0; k < area_fraction.size(); ++k) {
    if (area_fraction[k] > 0.0 && area_fraction[k] < 1.0) ++count;
  }
  return count;
}

CellProblemMesh make_cell_mesh(double ratio, int n) {
  if (n < 4) throw ConfigError("cell mesh needs at least 4 cells per side");
  if (!(ratio >= 0.0 && ratio < 0.5)) throw ConfigError("inclusion ratio must lie in [0, 0.5)");
  CellProblemMesh mesh;
  mesh.n = n;
  mesh.ratio = ratio;
  mesh.h = 1.0 / n;
  const double h = mesh.h;
  mesh.area_fraction.resize(n * n);
  mesh.face_east.resize(n * n);
  mesh.face_north.resize(n * n);
  for (int j = 0; j < n; ++j) {
    const double y0 = -0.5 + j * h, y1 = y0 + h;
    for (int i = 0; i < n; ++i) {
      const double x0 = -0.5 + i * h, x1 = x0 + h;
      const int c = mesh.index(i, j);
      const double covered = disk_rect_area(x0, x1, y0, y1, ratio);
      mesh.area_fraction[c] = std::clamp(1.0 - covered / (h * h), 0.0, 1.0);
      mesh.face_east[c] = std::clamp(open_length(x1, y0, y1, ratio) / h, 0.0, 1.0);
      mesh.face_north[c] = std::clamp(open_length(y1, x0, x1, ratio) / h, 0.0, 1.0);
    }
  }
  return mesh;
}

Eigen::VectorXd solve_cell_problem(const CellProblemMesh& mesh, int direction,
                                   CellSolveInfo* info) {
  if (direction != 0 && direction != 1) throw ConfigError("cell problem direction must be 0 or 1");
  const Operator op = build_operator(mesh, direction);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(op.active.size()));
  int iterations = 0;
  if (op.b.lpNorm<Eigen::Infinity>() > 0.0) {
    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-14);
    cg.setMaxIterations(20 * mesh.n * mesh.n);
    cg.compute(op.A);
    x = cg.solve(op.b);
    if (cg.info() != Eigen::Success && cg.error() > 1e-10) {
      throw SolverError("cell problem linear solve failed");
    }
    iterations = static_cast<int>(cg.iterations());
  }

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(mesh.n * mesh.n);
  double weight = 0.0, mean = 0.0;
  for (std::size_t k = 0; k < op.active.size(); ++k) {
    const int c = op.active[k];
    mean += mesh.area_fraction[c] * x[static_cast<Eigen::Index>(k)];
    weight += mesh.area_fraction[c];
  }
  mean /= weight;
  for (std::size_t k = 0; k < op.active.size(); ++k) {
    mu[op.active[k]] = x[static_cast<Eigen::Index>(k)] - mean;
  }
  if (info) {
    info->iterations = iterations;
    info->residual = cell_problem_residual(mesh, mu, direction);
  }
  return mu;
}

double cell_problem_residual(const CellProblemMesh& mesh, const Eigen::VectorXd& mu,
                             int direction) {
  const Operator op = build_operator(mesh, direction);
  Eigen::VectorXd x(static_cast<Eigen::Index>(op.active.size()));
  for (std::size_t k = 0; k < op.active.size(); ++k) x[static_cast<Eigen::Index>(k)] = mu[op.active[k]];
  return (op.A * x - op.b).lpNorm<Eigen::Infinity>();
}

Eigen::Matrix2d assemble_pi(const CellProblemMesh& mesh, const Eigen::VectorXd& mu_x,
                            const Eigen::VectorXd& mu_y) {
  const int n = mesh.n;
  const double h = mesh.h;
  const std::array<const Eigen::VectorXd*, 2> mu{&mu_x, &mu_y};
  Eigen::Matrix2d Pi = Eigen::Matrix2d::Zero();
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int c = mesh.index(i, j);
      const std::array<std::pair<int, double>, 2> faces{
          std::pair{mesh.index(i + 1, j), mesh.face_east[c]},
          std::pair{mesh.index(i, j + 1), mesh.face_north[c]}};
      for (int d = 0; d < 2; ++d) {
        const auto [nb, beta] = faces[d];
        if (beta <= 0.0) continue;
        for (int a = 0; a < 2; ++a) {
          const double grad = ((*mu[a])[nb] - (*mu[a])[c]) / h + (a == d ? 1.0 : 0.0);
          Pi(a, d) += beta * h * h * grad;
        }
      }
    }
  }
  return Pi / mesh.open_area();
}

double effective_radial_coefficient(const Eigen::Matrix2d& Pi) {
  const double d = 0.5 * (Pi(0, 0) + Pi(1, 1));
  const double aniso = std::max({std::abs(Pi(0, 0) - Pi(1, 1)), std::abs(Pi(0, 1)),
                                 std::abs(Pi(1, 0))});
  if (!(d > 0.0) || aniso > 0.01 * d) {
    throw SolverError("homogenized tensor is not isotropic within 1%");
  }
  return Pi(0, 0);
}

Eigen::Matrix2d homogenized_tensor(double ratio, int n) {
  const CellProblemMesh mesh = make_cell_mesh(ratio, n);
  return assemble_pi(mesh, solve_cell_problem(mesh, 0), solve_cell_problem(mesh, 1));
}

double cached_pi_hat(double ratio, int n) {
  static std::mutex mtx;
  static std::map<std::pair<double, int>, double> cache;
  std::lock_guard<std::mutex> lock(mtx);
  const auto key = std::pair{ratio, n};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const double value = effective_radial_coefficient(homogenized_tensor(ratio, n));
  cache.emplace(key, value);
  return value;
}

}  // namespace sapflow
