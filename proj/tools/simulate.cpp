#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "sapflow/config.hpp"
#include "sapflow/errors.hpp"
#include "sapflow/harness.hpp"
#include "sapflow/log.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kIngest = 3, kSolver = 4 };

int fail(int code, const std::string& what) {
  std::fprintf(stderr, "simulate: %s\n", what.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sapflow;
  logging::configure_from_env();

  CLI::App app{"Freeze-thaw sap exudation simulator"};
  std::string config, sweep, out, forcing;
  double duration_days = -1, cadence = -1;
  bool plot = false, absolute = false;
  std::vector<std::string> sets;
  app.add_option("--config", config, "key = value scenario file")->required();
  app.add_option("--sweep", sweep, "<param>=<v1,v2,...>");
  app.add_option("--out", out, "output directory");
  app.add_option("--forcing", forcing, "csv:<path> or sinusoid");
  app.add_option("--duration", duration_days, "simulated time [days]");
  app.add_option("--cadence", cadence, "output spacing [s]");
  app.add_flag("--plot", plot, "also write plot.svg");
  app.add_flag("--absolute", absolute, "emit absolute instead of gauge pressure");
  app.add_option("--set", sets, "extra key=value override (repeatable)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  Scenario sc;
  try {
    KeyValueConfig cfg = KeyValueConfig::load(config);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!sweep.empty()) cfg.set("sweep", sweep);
    if (!out.empty()) cfg.set("out_dir", out);
    if (!forcing.empty()) cfg.set("forcing", forcing);
    if (duration_days >= 0) cfg.set("duration_days", duration_days);
    if (cadence >= 0) cfg.set("cadence_s", cadence);
    if (plot) cfg.set("plot", "true");
    if (absolute) cfg.set("absolute_pressure", "true");
    sc = scenario_from_config(cfg);
  } catch (const ConfigError& e) {
    return fail(kConfig, e.what());
  } catch (const std::exception& e) {
    return fail(kConfig, e.what());
  }

  try {
    const auto outs = run_scenario(sc);
    for (const auto& o : outs) {
      const auto dir = sc.sweep ? sc.out_dir / o.label : sc.out_dir;
      emit_outputs(o, dir, sc);
      std::printf("%s: %zu samples, %zu events, %d cells -> %s\n", o.label.c_str(), o.time.size(),
                  o.events.size(), o.grid_cells, dir.string().c_str());
    }
  } catch (const ConfigError& e) {
    return fail(kConfig, e.what());
  } catch (const IngestError& e) {
    return fail(kIngest, e.what());
  } catch (const SolverError& e) {
    return fail(kSolver, e.what());
  } catch (const std::exception& e) {
    return fail(kSolver, e.what());
  }
  return kOk;
}
