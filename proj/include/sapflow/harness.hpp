#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sapflow/config.hpp"
#include "sapflow/ingest.hpp"
#include "sapflow/integrator.hpp"
#include "sapflow/params.hpp"
#include "sapflow/solver.hpp"

namespace sapflow {

inline constexpr double kAtmosphere = 101325.0;

struct SweepSpec {
  std::string param;  ///< one of R_tree, theta, A_tree, Cr_out, gamma_s
  std::vector<double> values;
};

/// Parses `param=v1,v2,...` and validates names and ranges.
SweepSpec parse_sweep(const std::string& text);
void validate_sweep(const SweepSpec& sweep);

struct ForcingSpec {
  bool synthetic = true;
  std::filesystem::path csv;
  int smoothing_passes = 10;
  bool allow_gaps = false;
};

/// Parses `sinusoid` or `csv:<path>`.
ForcingSpec parse_forcing(const std::string& text);

struct Scenario {
  KeyValueConfig overrides;  ///< model parameter keys only
  ForcingSpec forcing;
  double duration = 5 * 86400.0;  ///< [s]
  double cadence = 900.0;         ///< output spacing [s]
  std::optional<SweepSpec> sweep;
  std::filesystem::path out_dir = "out";
  bool plot = false;
  bool absolute_pressure = false;
  std::optional<double> initial_temp_c;  ///< default: forcing at t = 0
  double gamma_radius = 0.0;             ///< 0: default eps/2 - R_f
  int cell_mesh = 128;
  IntegratorConfig integrator;
};

/// Keys accepted in a scenario config file besides model parameters.
const std::vector<std::string>& scenario_keys();

/// Splits a config into model overrides and scenario settings; rejects unknown keys.
Scenario scenario_from_config(const KeyValueConfig& cfg);

struct EnvelopePoint {
  double time = 0;
  double value = 0;
  bool maximum = true;
};

/// Alternating maxima and minima; consecutive points differ by at least the prominence.
struct Envelope {
  std::vector<EnvelopePoint> points;

  std::vector<EnvelopePoint> maxima() const;
  std::vector<EnvelopePoint> minima() const;
};

Envelope extract_envelope(const std::vector<double>& time, const std::vector<double>& values,
                          double prominence = 1000.0);

/// Mean drop from each envelope maximum to the minimum that follows it.
double oscillation_amplitude(const Envelope& env);

struct RunOutput {
  std::string label;  ///< "base" or "<param>=<value>"
  ModelParams params;
  std::vector<double> time;    ///< [s]
  std::vector<double> pbar;    ///< gauge (or absolute) stem-averaged pressure [Pa]
  std::vector<double> uptake;  ///< total root uptake [m^3]
  std::vector<Crossing> events;
  Envelope envelope;
  RunDiagnostics diag;
  int grid_cells = 0;
  double pi_hat = 0;
  bool absolute_pressure = false;
};

/// Runs one parameter set.
RunOutput run_single(const Scenario& sc, const ModelParams& p, const std::string& label = "base");

/// Runs the scenario, once per sweep value in list order, or once without a sweep.
std::vector<RunOutput> run_scenario(const Scenario& sc);

/// Parameters for a sweep value: the scenario overrides plus the swept key.
ModelParams params_for(const Scenario& sc, const std::optional<std::pair<std::string, double>>& swept);

/// Writes pressure.csv, uptake.csv, events.csv, envelope.csv, run.json and optionally plot.svg.
void emit_outputs(const RunOutput& out, const std::filesystem::path& dir, const Scenario& sc);

/// Self-contained SVG of pbar with vertical event lines.
std::string render_svg(const RunOutput& out);

}  // namespace sapflow
