#include "sapflow/params.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "sapflow/errors.hpp"

namespace sapflow {

namespace {

struct Field {
  const char* key;
  double ModelParams::*member;
};

// Primitive keys, in serialization order. T_c is handled separately (Celsius I/O).
constexpr std::array kPrimitive = {
    Field{"R_tree", &ModelParams::R_tree},     Field{"R_sap", &ModelParams::R_sap},
    Field{"R_f", &ModelParams::R_f},           Field{"R_v", &ModelParams::R_v},
    Field{"L_f", &ModelParams::L_f},           Field{"L_v", &ModelParams::L_v},
    Field{"N", &ModelParams::N},               Field{"A_tree", &ModelParams::A_tree},
    Field{"Lw", &ModelParams::Lw},             Field{"Lr", &ModelParams::Lr},
    Field{"Cr_in", &ModelParams::Cr_in},       Field{"Cr_out", &ModelParams::Cr_out},
    Field{"p_soil", &ModelParams::p_soil},     Field{"gamma_s", &ModelParams::gamma_s},
    Field{"M_s", &ModelParams::M_s},           Field{"M_g", &ModelParams::M_g},
    Field{"H", &ModelParams::H},               Field{"K_b", &ModelParams::K_b},
    Field{"Rgas", &ModelParams::Rgas},         Field{"c_i", &ModelParams::c_i},
    Field{"c_w", &ModelParams::c_w},           Field{"c_inf", &ModelParams::c_inf},
    Field{"E_i", &ModelParams::E_i},           Field{"E_w", &ModelParams::E_w},
    Field{"k_i", &ModelParams::k_i},           Field{"k_w", &ModelParams::k_w},
    Field{"rho_i", &ModelParams::rho_i},       Field{"rho_w", &ModelParams::rho_w},
    Field{"sigma_iw", &ModelParams::sigma_iw}, Field{"sigma_gw", &ModelParams::sigma_gw},
    Field{"fiber_gas0", &ModelParams::fiber_gas0}, Field{"vessel_gas0", &ModelParams::vessel_gas0},
};

constexpr std::array kDerived = {
    Field{"theta", &ModelParams::theta},     Field{"A_fv", &ModelParams::A_fv},
    Field{"A_r", &ModelParams::A_r},         Field{"C_s", &ModelParams::C_s},
    Field{"eps", &ModelParams::eps},         Field{"delta_i", &ModelParams::delta_i},
    Field{"delta_w", &ModelParams::delta_w},
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace

double fpd(double gamma_s, double K_b, double M_s) { return K_b * gamma_s / M_s; }

ModelParams base_params() { return finalize_params(ModelParams{}); }

ModelParams finalize_params(ModelParams p) {
  for (const auto& f : kPrimitive) {
    require(std::isfinite(p.*f.member), std::string("non-finite value for ") + f.key);
  }
  for (const auto& [name, v] : {std::pair{"R_tree", p.R_tree}, {"R_f", p.R_f}, {"R_v", p.R_v},
                                {"L_f", p.L_f}, {"L_v", p.L_v}, {"A_tree", p.A_tree},
                                {"Lw", p.Lw}, {"Lr", p.Lr}, {"M_s", p.M_s}, {"M_g", p.M_g},
                                {"c_i", p.c_i}, {"c_w", p.c_w}, {"k_i", p.k_i}, {"k_w", p.k_w},
                                {"rho_i", p.rho_i}, {"rho_w", p.rho_w}, {"T_c", p.T_c},
                                {"Rgas", p.Rgas}}) {
    require(v > 0.0, std::string(name) + " must be strictly positive");
  }
  require(p.N >= 1.0 && std::floor(p.N) == p.N, "N must be a positive integer");
  require(p.R_sap >= 0.0 && p.R_sap < p.R_tree, "R_sap must satisfy 0 <= R_sap < R_tree");
  require(p.R_f < p.R_v, "fiber radius must be smaller than vessel radius");
  require(p.gamma_s >= 0.0 && p.gamma_s <= 0.10, "gamma_s must lie in [0, 0.10]");
  require(p.Cr_out >= 0.0 && p.Cr_out <= 1.0, "Cr_out must lie in [0, 1]");
  require(p.Cr_in >= 0.0 && p.Cr_in <= 1.0, "Cr_in must lie in [0, 1]");
  require(p.E_w > p.E_i, "E_w must exceed E_i");
  require(p.c_inf > p.c_i && p.c_inf > p.c_w, "c_inf must exceed both specific heats");
  require(p.H >= 0.0, "H must be non-negative");
  require(p.rho_w > p.rho_i, "water must be denser than ice");
  require(p.fiber_gas0 > 0.0 && p.fiber_gas0 < 1.0, "fiber_gas0 must lie in (0, 1)");
  require(p.vessel_gas0 > 0.0 && p.vessel_gas0 < 1.0, "vessel_gas0 must lie in (0, 1)");

  p.theta = p.R_sap / p.R_tree;
  p.A_fv = 2.0 * kPi * p.R_v * p.L_v;
  p.A_r = p.A_tree * (p.R_v / p.R_tree) * (p.R_v / p.R_tree);
  p.C_s = p.gamma_s * p.rho_w / p.M_s;
  p.T_c_sap = p.T_c - p.K_b * p.C_s / p.rho_w;
  p.eps = std::sqrt(kPi * p.R_v * p.R_v + kPi * p.R_f * p.R_f * p.N);
  const double L = p.latent_heat();
  p.delta_i = p.c_i * L / (2.0 * (p.c_inf - p.c_i));
  p.delta_w = p.c_w * L / (2.0 * (p.c_inf - p.c_w));
  return p;
}

ModelParams build_params(const KeyValueConfig& raw) {
  ModelParams p;
  for (const auto& f : kPrimitive) {
    if (auto v = raw.get_double(f.key)) p.*f.member = *v;
  }
  if (auto v = raw.get_double("T_c")) p.T_c = celsius_to_kelvin(*v);

  const auto theta_in = raw.get_double("theta");
  if (theta_in && !raw.contains("R_sap")) {
    require(*theta_in >= 0.0 && *theta_in < 1.0, "theta must lie in [0, 1)");
    p.R_sap = *theta_in * p.R_tree;
  }

  p = finalize_params(p);

  for (const auto& f : kDerived) {
    if (auto v = raw.get_double(f.key)) {
      if (std::string(f.key) == "theta" && !raw.contains("R_sap")) continue;
      require(close_rel(*v, p.*f.member, 1e-12), std::string("derived key '") + f.key +
                                                     "' disagrees with its primitives");
    }
  }
  if (auto v = raw.get_double("T_c_sap")) {
    require(std::abs(celsius_to_kelvin(*v) - p.T_c_sap) <= 1e-9,
            "derived key 'T_c_sap' disagrees with its primitives");
  }
  return p;
}

KeyValueConfig to_config(const ModelParams& p) {
  KeyValueConfig cfg;
  for (const auto& f : kPrimitive) cfg.set(f.key, p.*f.member);
  cfg.set("T_c", kelvin_to_celsius(p.T_c));
  for (const auto& f : kDerived) cfg.set(f.key, p.*f.member);
  cfg.set("T_c_sap", kelvin_to_celsius(p.T_c_sap));
  return cfg;
}

const std::set<std::string>& param_keys() {
  static const std::set<std::string> keys = [] {
    std::set<std::string> k{"T_c", "T_c_sap"};
    for (const auto& f : kPrimitive) k.insert(f.key);
    for (const auto& f : kDerived) k.insert(f.key);
    return k;
  }();
  return keys;
}

}  // namespace sapflow
