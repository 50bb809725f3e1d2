#include "sapflow/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "sapflow/errors.hpp"
#include "sapflow/log.hpp"

namespace sapflow {

namespace {

struct SweepRange {
  double lo, hi;
};

const std::map<std::string, SweepRange>& sweep_ranges() {
  static const std::map<std::string, SweepRange> r{{"R_tree", {0.05, 0.30}},
                                                   {"theta", {0.0, 0.7}},
                                                   {"A_tree", {1.0, 100.0}},
                                                   {"Cr_out", {0.05, 0.75}},
                                                   {"gamma_s", {0.015, 0.04}}};
  return r;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t") - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected a boolean for '" + key + "', got '" + v + "'");
}

int parse_int(const std::string& v, const std::string& key) {
  const double d = parse_double(v, key);
  if (std::floor(d) != d || std::abs(d) > 1e9) throw ConfigError("expected an integer for '" + key + "'");
  return static_cast<int>(d);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

SweepSpec parse_sweep(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("sweep must look like param=v1,v2,...");
  SweepSpec s;
  s.param = trim(text.substr(0, eq));
  std::stringstream rest(text.substr(eq + 1));
  std::string item;
  while (std::getline(rest, item, ',')) s.values.push_back(parse_double(trim(item), s.param));
  validate_sweep(s);
  return s;
}

void validate_sweep(const SweepSpec& s) {
  const auto it = sweep_ranges().find(s.param);
  if (it == sweep_ranges().end()) {
    throw ConfigError("sweep parameter '" + s.param +
                      "' is not one of R_tree, theta, A_tree, Cr_out, gamma_s");
  }
  if (s.values.empty()) throw ConfigError("sweep over '" + s.param + "' has no values");
  for (double v : s.values) {
    if (!(v >= it->second.lo && v <= it->second.hi)) {
      throw ConfigError("sweep value " + format_double(v) + " for '" + s.param + "' outside [" +
                        format_double(it->second.lo) + ", " + format_double(it->second.hi) + "]");
    }
  }
}

ForcingSpec parse_forcing(const std::string& text) {
  ForcingSpec f;
  if (text == "sinusoid") return f;
  if (text.rfind("csv:", 0) == 0 && text.size() > 4) {
    f.synthetic = false;
    f.csv = text.substr(4);
    return f;
  }
  throw ConfigError("forcing must be 'sinusoid' or 'csv:<path>', got '" + text + "'");
}

const std::vector<std::string>& scenario_keys() {
  static const std::vector<std::string> keys{
      "forcing",    "smoothing_passes", "allow_gaps", "duration_days",     "cadence_s",
      "sweep",      "out_dir",          "plot",       "absolute_pressure", "initial_temp_c",
      "gamma_radius", "cell_mesh",      "rtol",       "atol",              "dt_max",
      "dt_min",     "dt_initial",       "newton_max", "event_tol"};
  return keys;
}

Scenario scenario_from_config(const KeyValueConfig& cfg) {
  Scenario sc;
  const auto& pk = param_keys();
  const auto& sk = scenario_keys();
  for (const auto& [key, value] : cfg.entries()) {
    if (pk.count(key)) {
      sc.overrides.set(key, value);
      continue;
    }
    if (std::find(sk.begin(), sk.end(), key) == sk.end()) {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
    if (key == "forcing") {
      const auto keep = sc.forcing;
      sc.forcing = parse_forcing(value);
      sc.forcing.smoothing_passes = keep.smoothing_passes;
      sc.forcing.allow_gaps = keep.allow_gaps;
    } else if (key == "smoothing_passes") {
      sc.forcing.smoothing_passes = parse_int(value, key);
    } else if (key == "allow_gaps") {
      sc.forcing.allow_gaps = parse_bool(value, key);
    } else if (key == "duration_days") {
      sc.duration = parse_double(value, key) * 86400.0;
    } else if (key == "cadence_s") {
      sc.cadence = parse_double(value, key);
    } else if (key == "sweep") {
      sc.sweep = parse_sweep(value);
    } else if (key == "out_dir") {
      sc.out_dir = value;
    } else if (key == "plot") {
      sc.plot = parse_bool(value, key);
    } else if (key == "absolute_pressure") {
      sc.absolute_pressure = parse_bool(value, key);
    } else if (key == "initial_temp_c") {
      sc.initial_temp_c = parse_double(value, key);
    } else if (key == "gamma_radius") {
      sc.gamma_radius = parse_double(value, key);
    } else if (key == "cell_mesh") {
      sc.cell_mesh = parse_int(value, key);
    } else if (key == "rtol") {
      sc.integrator.rtol = parse_double(value, key);
    } else if (key == "atol") {
      sc.integrator.atol = parse_double(value, key);
    } else if (key == "dt_max") {
      sc.integrator.dt_max = parse_double(value, key);
    } else if (key == "dt_min") {
      sc.integrator.dt_min = parse_double(value, key);
    } else if (key == "dt_initial") {
      sc.integrator.dt_initial = parse_double(value, key);
    } else if (key == "newton_max") {
      sc.integrator.newton_max = parse_int(value, key);
    } else if (key == "event_tol") {
      sc.integrator.event_tol = parse_double(value, key);
    }
  }
  if (sc.duration < 0.0) throw ConfigError("duration must be non-negative");
  if (!(sc.cadence > 0.0)) throw ConfigError("cadence must be positive");
  if (sc.forcing.smoothing_passes < 0) throw ConfigError("smoothing_passes must be non-negative");
  sc.integrator.validate();
  build_params(sc.overrides);
  return sc;
}

std::vector<EnvelopePoint> Envelope::maxima() const {
  std::vector<EnvelopePoint> out;
  for (const auto& p : points) {
    if (p.maximum) out.push_back(p);
  }
  return out;
}

std::vector<EnvelopePoint> Envelope::minima() const {
  std::vector<EnvelopePoint> out;
  for (const auto& p : points) {
    if (!p.maximum) out.push_back(p);
  }
  return out;
}

Envelope extract_envelope(const std::vector<double>& t, const std::vector<double>& v,
                          double prominence) {
  Envelope env;
  if (t.size() != v.size()) throw ConfigError("envelope: time and value lengths differ");
  if (v.size() < 3) return env;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    // Plateaus count once, at their first sample.
    std::size_t j = i;
    while (j + 1 < v.size() && v[j + 1] == v[i]) ++j;
    if (j + 1 >= v.size()) break;
    const bool is_max = v[i] > v[i - 1] && v[i] > v[j + 1];
    const bool is_min = v[i] < v[i - 1] && v[i] < v[j + 1];
    if (is_max || is_min) {
      EnvelopePoint c{t[i], v[i], is_max};
      if (env.points.empty()) {
        env.points.push_back(c);
      } else {
        EnvelopePoint& last = env.points.back();
        if (last.maximum == c.maximum) {
          if ((c.maximum && c.value > last.value) || (!c.maximum && c.value < last.value)) last = c;
        } else if (std::abs(c.value - last.value) >= prominence) {
          env.points.push_back(c);
        }
      }
    }
    i = j;
  }
  // A leading extremum that never cleared the prominence against its successor is ripple.
  if (env.points.size() == 1) env.points.clear();
  return env;
}

double oscillation_amplitude(const Envelope& env) {
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k + 1 < env.points.size(); ++k) {
    if (env.points[k].maximum && !env.points[k + 1].maximum) {
      sum += env.points[k].value - env.points[k + 1].value;
      ++count;
    }
  }
  return count ? sum / count : 0.0;
}

ModelParams params_for(const Scenario& sc,
                       const std::optional<std::pair<std::string, double>>& swept) {
  KeyValueConfig cfg = sc.overrides;
  if (swept) {
    if (swept->first == "theta") cfg.erase("R_sap");
    if (swept->first == "R_tree" && cfg.contains("R_sap") && !cfg.contains("theta")) {
      logging::warn("sweeping R_tree with a fixed R_sap");
    }
    cfg.set(swept->first, swept->second);
  }
  return build_params(cfg);
}

RunOutput run_single(const Scenario& sc, const ModelParams& p, const std::string& label) {
  ForcingSignal forcing = ForcingSignal::sinusoid();
  if (!sc.forcing.synthetic) {
    CsvOptions opt;
    opt.allow_gaps = sc.forcing.allow_gaps;
    TemperatureSeries raw = load_csv(sc.forcing.csv, opt);
    forcing = ForcingSignal::from_series(
        sc.forcing.smoothing_passes > 0 ? smooth(raw, sc.forcing.smoothing_passes) : raw);
    if (sc.duration > forcing.span() + 1e-9) {
      throw IngestError("duration of " + format_double(sc.duration) + " s exceeds the record span of " +
                        format_double(forcing.span()) + " s");
    }
  }

  const StemModel model(p, sc.gamma_radius, sc.cell_mesh);
  const double T0 = sc.initial_temp_c ? celsius_to_kelvin(*sc.initial_temp_c) : forcing.kelvin(0.0);
  MacroField field = build_grid(model, T0);
  const Trajectory traj = advance(
      field, model, [&forcing](double t) { return forcing.kelvin(t); }, sc.duration, sc.integrator,
      sc.cadence);

  RunOutput out;
  out.label = label;
  out.params = p;
  out.diag = traj.diag;
  out.grid_cells = static_cast<int>(field.size());
  out.pi_hat = model.pi_hat;
  out.absolute_pressure = sc.absolute_pressure;
  const double offset = sc.absolute_pressure ? 0.0 : kAtmosphere;
  for (const auto& s : traj.samples) {
    out.time.push_back(s.time);
    out.pbar.push_back(s.pbar - offset);
    out.uptake.push_back(s.uptake);
  }
  out.events = forcing.crossings(sc.duration);
  out.envelope = extract_envelope(out.time, out.pbar);
  return out;
}

std::vector<RunOutput> run_scenario(const Scenario& sc) {
  std::vector<RunOutput> outs;
  if (!sc.sweep) {
    outs.push_back(run_single(sc, params_for(sc, std::nullopt), "base"));
    return outs;
  }
  validate_sweep(*sc.sweep);
  for (double v : sc.sweep->values) {
    const std::string label = sc.sweep->param + "=" + format_double(v);
    logging::info("running " + label);
    outs.push_back(run_single(sc, params_for(sc, std::pair{sc.sweep->param, v}), label));
  }
  return outs;
}

void emit_outputs(const RunOutput& out, const std::filesystem::path& dir, const Scenario& sc) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "': " + ec.message());

  std::string pressure = out.absolute_pressure ? "time_s,pbar_abs_pa\n" : "time_s,pbar_pa\n";
  std::string uptake = "time_s,uroot_m3\n";
  for (std::size_t k = 0; k < out.time.size(); ++k) {
    pressure += format_double(out.time[k]) + "," + format_double(out.pbar[k]) + "\n";
    uptake += format_double(out.time[k]) + "," + format_double(out.uptake[k]) + "\n";
  }
  std::string events = "time_s,kind\n";
  for (const auto& e : out.events) events += format_double(e.time) + "," + to_string(e.kind) + "\n";
  std::string envelope = "time_s,kind,pbar_pa\n";
  for (const auto& p : out.envelope.points) {
    envelope += format_double(p.time) + "," + (p.maximum ? "max" : "min") + "," + format_double(p.value) + "\n";
  }
  write_file(dir / "pressure.csv", pressure);
  write_file(dir / "uptake.csv", uptake);
  write_file(dir / "events.csv", events);
  write_file(dir / "envelope.csv", envelope);

  nlohmann::ordered_json j;
  j["label"] = out.label;
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  const KeyValueConfig resolved = to_config(out.params);
  for (const auto& [k, v] : resolved.entries()) params[k] = parse_double(v, k);
  j["params"] = params;
  j["params_units"] = {{"temperatures", "C"}, {"other", "SI"}};
  j["scenario"] = {{"forcing", sc.forcing.synthetic ? "sinusoid" : "csv:" + sc.forcing.csv.string()},
                   {"smoothing_passes", sc.forcing.synthetic ? 0 : sc.forcing.smoothing_passes},
                   {"duration_s", sc.duration},
                   {"cadence_s", sc.cadence},
                   {"gauge_offset_pa", out.absolute_pressure ? 0.0 : kAtmosphere},
                   {"gamma_radius", sc.gamma_radius},
                   {"cell_mesh", sc.cell_mesh},
                   {"rtol", sc.integrator.rtol},
                   {"atol", sc.integrator.atol},
                   {"dt_max", sc.integrator.dt_max}};
  if (sc.sweep) j["scenario"]["sweep"] = {{"param", sc.sweep->param}, {"values", sc.sweep->values}};
  j["grid_cells"] = out.grid_cells;
  j["pi_hat"] = out.pi_hat;
  j["diagnostics"] = {{"steps", out.diag.steps},
                      {"rejected", out.diag.rejected},
                      {"newton_iterations", out.diag.newton_iterations},
                      {"min_dt", out.diag.min_dt},
                      {"max_dt", out.diag.max_dt},
                      {"cell_substeps", out.diag.cells.substeps},
                      {"cell_rejected", out.diag.cells.rejected},
                      {"phase_events", out.diag.cells.events},
                      {"forced_transitions", out.diag.cells.forced},
                      {"fiber_mass_residual", out.diag.cells.fiber_residual},
                      {"vessel_volume_residual", out.diag.cells.vessel_residual},
                      {"gas_mass_residual", out.diag.cells.gas_residual},
                      {"energy_residual", out.diag.energy_residual}};
  write_file(dir / "run.json", j.dump(2) + "\n");
  if (sc.plot) write_file(dir / "plot.svg", render_svg(out));
}

std::string render_svg(const RunOutput& out) {
  const double W = 900, H = 400, L = 70, R = 20, T = 20, B = 50;
  double t1 = out.time.empty() ? 1.0 : std::max(out.time.back(), 1.0);
  double lo = 0.0, hi = 1.0;
  if (!out.pbar.empty()) {
    lo = *std::min_element(out.pbar.begin(), out.pbar.end());
    hi = *std::max_element(out.pbar.begin(), out.pbar.end());
  }
  if (hi - lo < 1.0) hi = lo + 1.0;
  const auto X = [&](double t) { return L + (W - L - R) * t / t1; };
  const auto Y = [&](double p) { return H - B - (H - T - B) * (p - lo) / (hi - lo); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" +
                  fixed(H, 0) + "\" viewBox=\"0 0 " + fixed(W, 0) + " " + fixed(H, 0) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<rect x=\"" + fixed(L, 1) + "\" y=\"" + fixed(T, 1) + "\" width=\"" + fixed(W - L - R, 1) +
       "\" height=\"" + fixed(H - T - B, 1) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (const auto& e : out.events) {
    const double x = X(e.time);
    s += "<line x1=\"" + fixed(x, 2) + "\" y1=\"" + fixed(T, 1) + "\" x2=\"" + fixed(x, 2) + "\" y2=\"" +
         fixed(H - B, 1) + "\" stroke=\"" + (e.kind == CrossingKind::thaw ? "#d62728" : "#1f77b4") +
         "\" stroke-dasharray=\"4 3\"/>\n";
  }
  s += "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.2\" points=\"";
  for (std::size_t k = 0; k < out.time.size(); ++k) {
    s += fixed(X(out.time[k]), 2) + "," + fixed(Y(out.pbar[k]), 2) + " ";
  }
  s += "\"/>\n";
  s += "<text x=\"" + fixed(L, 1) + "\" y=\"" + fixed(H - 15, 1) + "\" font-size=\"12\">time [days], 0 to " +
       fixed(t1 / 86400.0, 2) + "</text>\n";
  s += "<text x=\"5\" y=\"" + fixed(T + 10, 1) + "\" font-size=\"12\">" + fixed(hi / 1000.0, 1) + " kPa</text>\n";
  s += "<text x=\"5\" y=\"" + fixed(H - B, 1) + "\" font-size=\"12\">" + fixed(lo / 1000.0, 1) + " kPa</text>\n";
  s += "<text x=\"" + fixed(W / 2, 1) + "\" y=\"14\" font-size=\"13\" text-anchor=\"middle\">" + out.label +
       (out.absolute_pressure ? ": stem-averaged pressure" : ": stem-averaged gauge pressure") + "</text>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace sapflow
