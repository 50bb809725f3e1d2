#include "sapflow/enthalpy.hpp"

namespace sapflow {

EnthalpyLaw EnthalpyLaw::with_critical(const ModelParams& p, double T_crit) {
  EnthalpyLaw law;
  law.c_i = p.c_i;
  law.c_w = p.c_w;
  law.c_inf = p.c_inf;
  law.E_i = p.c_i * T_crit;
  law.E_w = law.E_i + p.latent_heat();
  law.delta_i = p.delta_i;
  law.delta_w = p.delta_w;
  law.T_crit = T_crit;
  law.D_ice = p.k_i / p.rho_i;
  law.D_water = p.k_w / p.rho_w;
  return law;
}

}  // namespace sapflow
