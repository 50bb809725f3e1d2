#include "sapflow/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "sapflow/errors.hpp"
#include "sapflow/homogenize.hpp"
#include "sapflow/log.hpp"

namespace sapflow {

namespace {

// Solves the tridiagonal system (sub, diag, sup) x = rhs in place of rhs.
void thomas(Eigen::VectorXd sub, Eigen::VectorXd diag, const Eigen::VectorXd& sup,
            Eigen::VectorXd& rhs) {
  const Eigen::Index n = diag.size();
  for (Eigen::Index k = 1; k < n; ++k) {
    const double m = sub[k] / diag[k - 1];
    diag[k] -= m * sup[k - 1];
    rhs[k] -= m * rhs[k - 1];
  }
  rhs[n - 1] /= diag[n - 1];
  for (Eigen::Index k = n - 2; k >= 0; --k) rhs[k] = (rhs[k] - sup[k] * rhs[k + 1]) / diag[k];
}

double weighted_max(const Eigen::VectorXd& v, const Eigen::VectorXd& ref,
                    const IntegratorConfig& cfg) {
  return (v.array().abs() / (cfg.atol + cfg.rtol * ref.array().abs())).maxCoeff();
}

struct BdfCoeffs {
  double gamma = 1.0;  // scales h f
  Eigen::VectorXd psi; // history part
};

// Newton solve of E - psi - gamma h f(E) = 0 with a finite-difference tridiagonal Jacobian.
std::optional<Eigen::VectorXd> solve_implicit(const Eigen::VectorXd& guess, const BdfCoeffs& c,
                                              double h, const MacroField& field, double T_amb,
                                              const StemModel& model,
                                              const std::vector<GammaSource>& src,
                                              const IntegratorConfig& cfg, long& iterations) {
  const Eigen::Index n = guess.size();
  Eigen::VectorXd E = guess;
  const auto residual = [&](const Eigen::VectorXd& e) {
    return Eigen::VectorXd(e - c.psi - c.gamma * h * macro_rhs(e, field, T_amb, model, src));
  };
  Eigen::VectorXd R = residual(E);
  for (int it = 0; it < cfg.newton_max; ++it) {
    ++iterations;
    const Eigen::VectorXd f0 = macro_rhs(E, field, T_amb, model, src);
    Eigen::VectorXd sub = Eigen::VectorXd::Zero(n), diag = Eigen::VectorXd::Ones(n),
                    sup = Eigen::VectorXd::Zero(n);
    for (int color = 0; color < 3; ++color) {
      Eigen::VectorXd Ep = E;
      Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
      for (Eigen::Index j = color; j < n; j += 3) {
        step[j] = 1e-6 * std::max(std::abs(E[j]), 1.0);
        Ep[j] += step[j];
      }
      const Eigen::VectorXd df = macro_rhs(Ep, field, T_amb, model, src) - f0;
      for (Eigen::Index j = color; j < n; j += 3) {
        const double s = -c.gamma * h / step[j];
        diag[j] += s * df[j];
        if (j > 0) sup[j - 1] = s * df[j - 1];
        if (j + 1 < n) sub[j + 1] = s * df[j + 1];
      }
    }
    Eigen::VectorXd dE = -R;
    thomas(sub, diag, sup, dE);
    if (!dE.allFinite()) return std::nullopt;

    double lambda = 1.0;
    Eigen::VectorXd E_try = E + dE;
    Eigen::VectorXd R_try = residual(E_try);
    for (int k = 0; k < 6 && R_try.lpNorm<Eigen::Infinity>() > R.lpNorm<Eigen::Infinity>(); ++k) {
      lambda *= 0.5;
      E_try = E + lambda * dE;
      R_try = residual(E_try);
    }
    E = E_try;
    R = R_try;
    if (weighted_max(lambda * dE, E, cfg) < 1e-3) return E;
  }
  return std::nullopt;
}

}  // namespace

StemModel::StemModel(const ModelParams& p, double R_gamma, int cell_mesh)
    : params(p), cell(p, R_gamma), sap_law(EnthalpyLaw::sap(p)) {
  pi_hat = cached_pi_hat(cell.geometry.R_gamma / cell.geometry.eps, cell_mesh);
}

StemModel::StemModel(const ModelParams& p, double pi_hat_, bool micro_, double R_gamma)
    : params(p), cell(p, R_gamma), sap_law(EnthalpyLaw::sap(p)), pi_hat(pi_hat_), micro(micro_) {}

int choose_cell_count(double width, const GridRule& rule) {
  if (!(width > 0.0)) throw ConfigError("sapwood width must be positive");
  int n = std::max(rule.min_cells, static_cast<int>(std::ceil(width / rule.target_dx - 1e-9)));
  if (n <= rule.max_cells) return n;
  if (width / rule.max_cells <= rule.limit_dx) {
    logging::warn("grid clamped to " + std::to_string(rule.max_cells) + " cells; spacing " +
                  std::to_string(width / rule.max_cells) + " m exceeds the preferred " +
                  std::to_string(rule.target_dx) + " m");
    return rule.max_cells;
  }
  n = static_cast<int>(std::ceil(width / rule.limit_dx - 1e-9));
  if (n > rule.hard_cap) {
    throw ConfigError("sapwood width " + std::to_string(width) + " m needs " + std::to_string(n) +
                      " cells, above the cap of " + std::to_string(rule.hard_cap));
  }
  logging::warn("grid extended to " + std::to_string(n) + " cells to keep spacing at or below " +
                std::to_string(rule.limit_dx) + " m");
  return n;
}

Eigen::VectorXd MacroField::ring_weights() const {
  const Eigen::Index n = size();
  Eigen::VectorXd w(n);
  for (Eigen::Index j = 0; j < n; ++j) w[j] = 0.5 * (faces[j + 1] * faces[j + 1] - faces[j] * faces[j]);
  return w;
}

MacroField build_grid(const StemModel& model, double T0, int n_cells) {
  const ModelParams& p = model.params;
  MacroField f;
  f.faces = Eigen::VectorXd::LinSpaced(n_cells + 1, p.R_sap, p.R_tree);
  f.x = 0.5 * (f.faces.head(n_cells) + f.faces.tail(n_cells));
  f.dx = (p.R_tree - p.R_sap) / n_cells;
  f.E = Eigen::VectorXd::Constant(n_cells, omega_inv(T0, model.sap_law));
  f.T = omega(f.E.array(), model.sap_law).matrix();
  f.pi_hat = model.pi_hat;
  if (model.micro) f.cells.assign(n_cells, initial_cell(model.cell, T0));
  return f;
}

MacroField build_grid(const StemModel& model, double T0, const GridRule& rule) {
  return build_grid(model, T0, choose_cell_count(model.params.R_tree - model.params.R_sap, rule));
}

Eigen::VectorXd macro_rhs(const Eigen::VectorXd& E, const MacroField& field, double T_ambient,
                          const StemModel& model, const std::vector<GammaSource>& src) {
  const Eigen::Index n = E.size();
  const EnthalpyLaw& law = model.sap_law;
  const Eigen::ArrayXd T = omega(E.array(), law);
  const Eigen::ArrayXd D = diffusivity(E.array(), law);
  const double k = field.pi_hat / field.dx;

  Eigen::VectorXd div = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j + 1 < n; ++j) {
    const double F = k * 0.5 * (D[j] + D[j + 1]) * (T[j + 1] - T[j]) * field.faces[j + 1];
    div[j] += F;
    div[j + 1] -= F;
  }
  div[n - 1] += 2.0 * k * D[n - 1] * (T_ambient - T[n - 1]) * field.faces[n];

  const Eigen::VectorXd w = field.ring_weights();
  Eigen::VectorXd out = (div.array() / w.array()).matrix();
  if (!src.empty()) {
    for (Eigen::Index j = 0; j < n; ++j) out[j] += src[static_cast<std::size_t>(j)](T[j]);
  }
  return out;
}

Eigen::VectorXd macro_rhs(const MacroField& field, double T_ambient, const StemModel& model) {
  std::vector<GammaSource> src;
  if (model.micro) {
    for (const auto& c : field.cells) src.push_back(gamma_source(c, model.cell));
  }
  return macro_rhs(field.E, field, T_ambient, model, src);
}

double boundary_flux(const Eigen::VectorXd& E, const MacroField& field, double T_ambient,
                     const StemModel& model) {
  const Eigen::Index n = E.size();
  const double D = diffusivity(E[n - 1], model.sap_law);
  const double T = omega(E[n - 1], model.sap_law);
  return 2.0 * field.pi_hat / field.dx * D * (T_ambient - T) * field.faces[n];
}

double ring_average(const MacroField& field, const Eigen::VectorXd& values) {
  const Eigen::VectorXd w = field.ring_weights();
  return w.dot(values) / w.sum();
}

double stem_average_pressure(const MacroField& field) {
  Eigen::VectorXd p(static_cast<Eigen::Index>(field.cells.size()));
  for (std::size_t j = 0; j < field.cells.size(); ++j) p[static_cast<Eigen::Index>(j)] = field.cells[j].p_w_v;
  return ring_average(field, p);
}

double total_root_uptake(const MacroField& field, const ModelParams& p) {
  const Eigen::VectorXd w = field.ring_weights();
  double total = 0.0;
  for (std::size_t j = 0; j < field.cells.size(); ++j) {
    total += field.cells[j].U_r * 2.0 * kPi * w[static_cast<Eigen::Index>(j)] / (p.eps * p.eps);
  }
  return total;
}

namespace {

Snapshot snapshot_of(const MacroField& f, const ModelParams& p) {
  Snapshot s;
  s.time = f.time;
  s.T = f.T;
  s.p_w_v = Eigen::VectorXd::Zero(f.size());
  for (std::size_t j = 0; j < f.cells.size(); ++j) s.p_w_v[static_cast<Eigen::Index>(j)] = f.cells[j].p_w_v;
  s.pbar = f.cells.empty() ? 0.0 : stem_average_pressure(f);
  s.uptake = total_root_uptake(f, p);
  return s;
}

Snapshot lerp(const Snapshot& a, const Snapshot& b, double t) {
  const double w = (t - a.time) / (b.time - a.time);
  Snapshot s;
  s.time = t;
  s.T = (1.0 - w) * a.T + w * b.T;
  s.p_w_v = (1.0 - w) * a.p_w_v + w * b.p_w_v;
  s.pbar = (1.0 - w) * a.pbar + w * b.pbar;
  s.uptake = (1.0 - w) * a.uptake + w * b.uptake;
  return s;
}

}  // namespace

Trajectory advance(MacroField& field, const StemModel& model, const AmbientSignal& ambient,
                   double t_end, const IntegratorConfig& cfg, double cadence) {
  cfg.validate();
  if (!(cadence > 0.0)) throw ConfigError("output cadence must be positive");
  const ModelParams& p = model.params;
  const Eigen::Index n = field.size();
  const double t0 = field.time;

  Trajectory traj;
  RunDiagnostics& diag = traj.diag;
  Snapshot last = snapshot_of(field, p);
  traj.samples.push_back(last);
  long next_out = 1;
  const double out_slack = 1e-9 * std::max(1.0, std::abs(t_end));

  std::optional<Eigen::VectorXd> E_prev;
  double h_prev = 0.0;
  double h = std::min(cfg.dt_initial, cfg.dt_max);
  int forced_seen = 0;
  for (const auto& c : field.cells) forced_seen += c.forced_transitions;

  while (t_end - field.time > out_slack) {
    const double t = field.time;
    h = std::min({h, cfg.dt_max, t_end - t});
    const double T_amb = ambient(t + h);

    // Micro half-step at frozen macro temperature.
    std::vector<CellState> cells = field.cells;
    CellStepStats step_stats;
    std::string failure;
    bool collapse = false;
    if (model.micro) {
      for (Eigen::Index j = 0; j < n && failure.empty(); ++j) {
        try {
          cells[static_cast<std::size_t>(j)] =
              step_cell(field.cells[static_cast<std::size_t>(j)], field.T[j], h, model.cell, cfg,
                        &step_stats);
        } catch (const BubbleCollapse& e) {
          failure = "cell " + std::to_string(j) + " at t=" + std::to_string(t) + " s: " + e.what();
          collapse = true;
        } catch (const SolverError& e) {
          failure = "cell " + std::to_string(j) + " at t=" + std::to_string(t) + " s: " + e.what();
        }
      }
    }

    std::optional<Eigen::VectorXd> E_new;
    double err = 0.0;
    if (failure.empty()) {
      std::vector<GammaSource> src;
      if (model.micro) {
        src.reserve(cells.size());
        for (const auto& c : cells) src.push_back(gamma_source(c, model.cell));
      }
      BdfCoeffs bdf;
      Eigen::VectorXd pred;
      const double w = E_prev ? h / h_prev : 0.0;
      if (E_prev) {
        bdf.gamma = (1.0 + w) / (1.0 + 2.0 * w);
        bdf.psi = ((1.0 + w) * (1.0 + w) * field.E - w * w * *E_prev) / (1.0 + 2.0 * w);
        pred = field.E + w * (field.E - *E_prev);
      } else {
        bdf.psi = field.E;
        pred = field.E + h * macro_rhs(field.E, field, T_amb, model, src);
      }
      E_new = solve_implicit(pred, bdf, h, field, T_amb, model, src, cfg, diag.newton_iterations);
      if (E_new) {
        err = weighted_max(0.5 * (*E_new - pred), *E_new, cfg);
        const Eigen::VectorXd R =
            (E_new->array() - bdf.psi.array() -
             bdf.gamma * h * macro_rhs(*E_new, field, T_amb, model, src).array())
                .matrix();
        const Eigen::VectorXd wts = field.ring_weights();
        const double scale = wts.dot((E_new->array() - field.E.array()).abs().matrix()) +
                             wts.sum() * cfg.atol;
        diag.energy_residual = std::max(diag.energy_residual, std::abs(wts.dot(R)) / scale);
      } else {
        failure = "macro Newton iteration failed at t=" + std::to_string(t) + " s, dt=" +
                  std::to_string(h) + " s";
      }
    }

    if (!failure.empty() || err > 1.0) {
      ++diag.rejected;
      const double factor = failure.empty() ? std::max(0.2, 0.9 / std::sqrt(err)) : 0.25;
      if (h * factor < cfg.dt_min) {
        const std::string msg = failure.empty()
                                    ? "macro step underflow at t=" + std::to_string(t) + " s"
                                    : failure;
        if (collapse) throw BubbleCollapse(msg);
        throw SolverError(msg + " (step size below dt_min)");
      }
      h *= factor;
      continue;
    }

    // Accept.
    E_prev = field.E;
    h_prev = h;
    field.E = *E_new;
    field.T = omega(field.E.array(), model.sap_law).matrix();
    field.cells = std::move(cells);
    field.time = t + h;
    diag.cells.merge(step_stats);
    ++diag.steps;
    diag.min_dt = diag.steps == 1 ? h : std::min(diag.min_dt, h);
    diag.max_dt = std::max(diag.max_dt, h);

    int forced_now = 0;
    for (const auto& c : field.cells) forced_now += c.forced_transitions;
    if (forced_now != forced_seen) {
      logging::info("forced phase transitions: " + std::to_string(forced_now - forced_seen) +
                    " at t=" + std::to_string(field.time) + " s");
      forced_seen = forced_now;
    }

    const Snapshot now = snapshot_of(field, p);
    while (true) {
      const double t_out = t0 + static_cast<double>(next_out) * cadence;
      if (t_out > field.time + out_slack || t_out > t_end + out_slack) break;
      traj.samples.push_back(std::abs(t_out - now.time) <= out_slack ? now : lerp(last, now, t_out));
      traj.samples.back().time = t_out;
      ++next_out;
    }
    last = now;
    h *= std::min(2.0, std::max(0.2, 0.9 / std::sqrt(std::max(err, 1e-6))));
  }
  return traj;
}

}  // namespace sapflow
