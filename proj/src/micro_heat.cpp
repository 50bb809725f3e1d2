#include "sapflow/micro_heat.hpp"

#include <cmath>
#include <string>

#include "sapflow/errors.hpp"

namespace sapflow {

namespace {

constexpr int kMaxPicard = 200;
constexpr double kPicardTol = 1e-12;  // K

double interpolate(const Eigen::VectorXd& x, const Eigen::VectorXd& f, double at) {
  const Eigen::Index n = x.size();
  if (at <= x[0]) return f[0];
  if (at >= x[n - 1]) return f[n - 1];
  Eigen::Index k = 0;
  while (k + 2 < n && x[k + 1] < at) ++k;
  const double w = (at - x[k]) / (x[k + 1] - x[k]);
  return (1.0 - w) * f[k] + w * f[k + 1];
}

Eigen::VectorXd face_conductance(const Eigen::VectorXd& y, const Eigen::VectorXd& T,
                                 const EnthalpyLaw& law) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd G(n - 1);
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    const double E_face = 0.5 * (omega_inv(T[k], law) + omega_inv(T[k + 1], law));
    G[k] = diffusivity(E_face, law) / std::log(y[k + 1] / y[k]);
  }
  return G;
}

MicroHeatResult finish(MicroProfile prof, const Eigen::VectorXd& T, const Eigen::VectorXd& G,
                       int iterations) {
  const Eigen::Index n = prof.size();
  MicroHeatResult res;
  res.interface_gradient =
      (T[1] - T[0]) / (prof.radius[0] * std::log(prof.radius[1] / prof.radius[0]));
  res.gamma_conductance = G[n - 2];
  res.gamma_flux = G[n - 2] * (T[n - 1] - T[n - 2]);
  res.iterations = iterations;
  res.profile = std::move(prof);
  return res;
}

}  // namespace

CellGeometry CellGeometry::from(const ModelParams& p, double R_gamma) {
  CellGeometry g;
  g.eps = p.eps;
  g.R_gamma = R_gamma > 0.0 ? R_gamma : 0.5 * p.eps - p.R_f;
  if (g.R_gamma <= p.R_f || g.R_gamma >= 0.5 * p.eps) {
    throw ConfigError("Gamma radius must lie between R_f and eps/2");
  }
  g.area_Y1 = p.eps * p.eps - kPi * g.R_gamma * g.R_gamma;
  return g;
}

MicroProfile make_profile(double inner, double outer, double T_inner, double T_outer,
                          const EnthalpyLaw& law, int n) {
  if (n < 3) throw ConfigError("micro grid needs at least 3 nodes");
  if (!(inner > 0.0 && inner < outer)) throw SolverError("micro domain radii out of order");
  MicroProfile prof;
  prof.radius = Eigen::VectorXd::LinSpaced(n, inner, outer);
  prof.enthalpy = Eigen::VectorXd::Constant(n, omega_inv(T_outer, law));
  prof.enthalpy[0] = omega_inv(T_inner, law);
  return prof;
}

MicroHeatResult micro_gradients(const MicroProfile& profile, const EnthalpyLaw& law) {
  const Eigen::VectorXd T = omega(profile.enthalpy.array(), law).matrix();
  return finish(profile, T, face_conductance(profile.radius, T, law), 0);
}

MicroHeatResult micro_heat_step(const MicroProfile& profile, double inner_radius,
                                double outer_radius, double T_inner, double T_gamma, double dt,
                                const EnthalpyLaw& law, double c_w) {
  const Eigen::Index n = profile.size();
  if (n < 3) throw SolverError("micro profile has fewer than 3 nodes");
  if (!(inner_radius > 0.0 && inner_radius < outer_radius)) {
    throw SolverError("micro domain radii out of order: inner=" + std::to_string(inner_radius) +
                      " outer=" + std::to_string(outer_radius));
  }

  MicroProfile next;
  next.radius = Eigen::VectorXd::LinSpaced(n, inner_radius, outer_radius);
  const Eigen::VectorXd& y = next.radius;
  const double dy = y[1] - y[0];

  // Old temperatures carried onto the new nodes; if the phase boundary
  // receded, the uncovered region starts at the melting temperature.
  const Eigen::VectorXd T_prev = omega(profile.enthalpy.array(), law).matrix();
  Eigen::VectorXd T_old(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    T_old[k] = y[k] < profile.radius[0] ? T_inner : interpolate(profile.radius, T_prev, y[k]);
  }

  Eigen::VectorXd T = T_old;
  T[0] = T_inner;
  T[n - 1] = T_gamma;

  if (!(dt > 0.0)) {
    next.enthalpy = omega_inv(T.array(), law).matrix();
    return finish(std::move(next), T, face_conductance(y, T, law), 0);
  }

  Eigen::VectorXd cap(n);
  for (Eigen::Index k = 0; k < n; ++k) cap[k] = c_w * y[k] * dy / dt;

  Eigen::VectorXd G;
  Eigen::VectorXd sub(n), diag(n), rhs(n);
  int it = 0;
  for (;; ++it) {
    if (it >= kMaxPicard) {
      throw SolverError("micro heat step did not converge after " + std::to_string(kMaxPicard) +
                        " iterations");
    }
    G = face_conductance(y, T, law);

    // Thomas sweep on interior nodes 1..n-2.
    Eigen::VectorXd T_new = T;
    for (Eigen::Index k = 1; k + 1 < n; ++k) {
      diag[k] = cap[k] + G[k - 1] + G[k];
      rhs[k] = cap[k] * T_old[k];
      if (k == 1) rhs[k] += G[0] * T[0];
      if (k == n - 2) rhs[k] += G[n - 2] * T[n - 1];
      if (k > 1) {
        const double m = G[k - 1] / diag[k - 1];
        diag[k] -= m * G[k - 1];
        rhs[k] += m * rhs[k - 1];
      }
      sub[k] = G[k];
    }
    for (Eigen::Index k = n - 2; k >= 1; --k) {
      const double upper = k + 1 < n - 1 ? sub[k] * T_new[k + 1] : 0.0;
      T_new[k] = (rhs[k] + upper) / diag[k];
    }

    const double change = (T_new - T).lpNorm<Eigen::Infinity>();
    T = T_new;
    if (change <= kPicardTol) break;
  }

  G = face_conductance(y, T, law);
  next.enthalpy = omega_inv(T.array(), law).matrix();
  return finish(std::move(next), T, G, it + 1);
}

double gamma_flux_integral(double gamma_flux, const CellGeometry& geo) {
  return -2.0 * kPi * gamma_flux / geo.area_Y1;
}

double gamma_flux_integral(const MicroHeatResult& res, const CellGeometry& geo) {
  return gamma_flux_integral(res.gamma_flux, geo);
}

double micro_energy(const MicroProfile& profile, const EnthalpyLaw& law, double c_w) {
  const Eigen::Index n = profile.size();
  const double dy = profile.radius[1] - profile.radius[0];
  double sum = 0.0;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    sum += c_w * profile.radius[k] * dy * omega(profile.enthalpy[k], law);
  }
  return sum;
}

}  // namespace sapflow
