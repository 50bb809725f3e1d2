#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sapflow/errors.hpp"
#include "sapflow/harness.hpp"

using namespace sapflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("sapflow_test_" + name);
  fs::remove_all(d);
  return d;
}

Scenario short_scenario(double hours) {
  Scenario sc;
  sc.duration = hours * 3600.0;
  sc.cadence = 900.0;
  return sc;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("sweep parsing") {
  const SweepSpec s = parse_sweep("gamma_s=0.015, 0.03,0.04");
  CHECK(s.param == "gamma_s");
  CHECK(s.values == std::vector<double>{0.015, 0.03, 0.04});
  CHECK(parse_sweep("R_tree=0.05").values.size() == 1);
  CHECK_THROWS_AS(parse_sweep("Lw=1e-13"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("R_tree=0.5"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("theta=0.8"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("Cr_out=0.01"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("A_tree=200"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("gamma_s=0.05"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("gamma_s"), ConfigError);
  CHECK_THROWS_AS(parse_sweep("gamma_s=a"), ConfigError);
}

TEST_CASE("forcing parsing") {
  CHECK(parse_forcing("sinusoid").synthetic);
  const ForcingSpec f = parse_forcing("csv:data/t.csv");
  CHECK_FALSE(f.synthetic);
  CHECK(f.csv == fs::path("data/t.csv"));
  CHECK_THROWS_AS(parse_forcing("csv:"), ConfigError);
  CHECK_THROWS_AS(parse_forcing("square"), ConfigError);
}

TEST_CASE("scenario config") {
  const KeyValueConfig c = KeyValueConfig::parse(
      "R_tree = 0.0925\ntheta = 0\ngamma_s = 0.018\nduration_days = 2\ncadence_s = 600\n"
      "forcing = csv:x.csv\nsmoothing_passes = 4\nplot = true\nrtol = 1e-5\n");
  const Scenario sc = scenario_from_config(c);
  CHECK(sc.duration == 2 * 86400.0);
  CHECK(sc.cadence == 600.0);
  CHECK_FALSE(sc.forcing.synthetic);
  CHECK(sc.forcing.smoothing_passes == 4);
  CHECK(sc.plot);
  CHECK(sc.integrator.rtol == 1e-5);
  CHECK(*sc.overrides.get_double("R_tree") == 0.0925);
  CHECK_FALSE(sc.overrides.contains("duration_days"));

  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("colour = red\n")), ConfigError);
  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("cadence_s = 0\n")), ConfigError);
  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("duration_days = -1\n")), ConfigError);
  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("gamma_s = 0.2\n")), ConfigError);
  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("rtol = 0\n")), ConfigError);
  CHECK_THROWS_AS(scenario_from_config(KeyValueConfig::parse("plot = maybe\n")), ConfigError);
}

TEST_CASE("shipped presets load") {
  for (const char* name : {"base", "R1", "R2", "S1"}) {
    const fs::path p = fs::path(SAPFLOW_SOURCE_DIR) / "presets" / (std::string(name) + ".cfg");
    CAPTURE(p.string());
    const Scenario sc = scenario_from_config(KeyValueConfig::load(p));
    CHECK(sc.cadence == 900.0);
  }
  const ModelParams s1 = params_for(
      scenario_from_config(KeyValueConfig::load(fs::path(SAPFLOW_SOURCE_DIR) / "presets/S1.cfg")), std::nullopt);
  CHECK(s1.R_tree == 0.305);
  CHECK(s1.R_sap == doctest::Approx(0.1525));
}

TEST_CASE("envelope of a monotone series is empty") {
  std::vector<double> t, v;
  for (int k = 0; k < 100; ++k) {
    t.push_back(k);
    v.push_back(1e4 * k);
  }
  CHECK(extract_envelope(t, v).points.empty());
  CHECK(oscillation_amplitude(extract_envelope(t, v)) == 0.0);
}

TEST_CASE("envelope of a sinusoid") {
  std::vector<double> t, v;
  const double P = 86400;
  for (int k = 0; k <= 480; ++k) {
    t.push_back(900.0 * k);
    v.push_back(2e4 * std::sin(2 * kPi * t.back() / P));
  }
  const Envelope env = extract_envelope(t, v);
  REQUIRE(env.points.size() == 10);
  for (std::size_t k = 0; k < env.points.size(); ++k) {
    const EnvelopePoint& e = env.points[k];
    CHECK(e.maximum == (k % 2 == 0));
    const double expect = P / 4 + static_cast<double>(k) * P / 2;
    CHECK(std::abs(e.time - expect) <= 900.0);
  }
  CHECK(oscillation_amplitude(env) == doctest::Approx(4e4).epsilon(1e-3));
  CHECK(env.maxima().size() == 5);
  CHECK(env.minima().size() == 5);
}

TEST_CASE("envelope ignores ripple below the prominence") {
  std::vector<double> t, v;
  for (int k = 0; k < 200; ++k) {
    t.push_back(k);
    v.push_back(100.0 * k + (k % 2 ? 300.0 : 0.0));
  }
  CHECK(extract_envelope(t, v, 1000.0).points.empty());
  CHECK_FALSE(extract_envelope(t, v, 100.0).points.empty());
}

TEST_CASE("zero-duration run") {
  const Scenario sc = short_scenario(0);
  const RunOutput out = run_single(sc, params_for(sc, std::nullopt));
  REQUIRE(out.time.size() == 1);
  CHECK(out.time[0] == 0.0);
  CHECK(out.pbar[0] == doctest::Approx(out.params.p_soil - kAtmosphere));
  CHECK(out.events.empty());
  CHECK(out.envelope.points.empty());
  CHECK(out.grid_cells == 25);
}

TEST_CASE("empty output writes headers and manifest") {
  const fs::path dir = scratch("empty");
  RunOutput out;
  out.params = build_params({});
  emit_outputs(out, dir, Scenario{});
  CHECK(slurp(dir / "pressure.csv") == "time_s,pbar_pa\n");
  CHECK(slurp(dir / "uptake.csv") == "time_s,uroot_m3\n");
  CHECK(slurp(dir / "events.csv") == "time_s,kind\n");
  CHECK(lines(dir / "envelope.csv") == 1);
  CHECK(fs::exists(dir / "run.json"));
  CHECK_FALSE(fs::exists(dir / "plot.svg"));
  fs::remove_all(dir);
}

TEST_CASE("outputs, row counts and determinism") {
  Scenario sc = short_scenario(12);
  sc.plot = true;
  const ModelParams p = params_for(sc, std::nullopt);
  const RunOutput a = run_single(sc, p), b = run_single(sc, p);
  const fs::path da = scratch("a"), db = scratch("b");
  emit_outputs(a, da, sc);
  emit_outputs(b, db, sc);

  CHECK(lines(da / "pressure.csv") == 1 + 12 * 4 + 1);
  CHECK(lines(da / "uptake.csv") == 1 + 12 * 4 + 1);
  CHECK(lines(da / "events.csv") == 1 + 2);
  for (const char* f : {"pressure.csv", "uptake.csv", "events.csv", "envelope.csv", "run.json", "plot.svg"}) {
    CAPTURE(f);
    CHECK(slurp(da / f) == slurp(db / f));
  }
  CHECK(slurp(da / "events.csv").find(",freeze\n") != std::string::npos);
  CHECK(slurp(da / "plot.svg").rfind("<svg", 0) == 0);

  const auto manifest = nlohmann::json::parse(slurp(da / "run.json"));
  CHECK(manifest["label"] == "base");
  CHECK(manifest["grid_cells"] == 25);
  const KeyValueConfig resolved = to_config(p);
  for (const auto& [k, v] : resolved.entries()) {
    CAPTURE(k);
    CHECK(manifest["params"].contains(k));
  }
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST_CASE("absolute pressure flag") {
  Scenario sc = short_scenario(1);
  sc.absolute_pressure = true;
  const RunOutput abs = run_single(sc, params_for(sc, std::nullopt));
  sc.absolute_pressure = false;
  const RunOutput gauge = run_single(sc, params_for(sc, std::nullopt));
  for (std::size_t k = 0; k < abs.pbar.size(); ++k) CHECK(abs.pbar[k] - gauge.pbar[k] == doctest::Approx(kAtmosphere));
  const fs::path d = scratch("abs");
  emit_outputs(abs, d, sc);
  CHECK(slurp(d / "pressure.csv").rfind("time_s,pbar_abs_pa\n", 0) == 0);
  fs::remove_all(d);
}

TEST_CASE("sweep isolation and ordering") {
  Scenario sc = short_scenario(3);
  sc.sweep = parse_sweep("Cr_out=0.75,0.05");
  const std::vector<RunOutput> both = run_scenario(sc);
  REQUIRE(both.size() == 2);
  CHECK(both[0].label == "Cr_out=0.75");
  CHECK(both[1].label == "Cr_out=0.05");
  sc.sweep = parse_sweep("Cr_out=0.05");
  const std::vector<RunOutput> alone = run_scenario(sc);
  REQUIRE(alone.size() == 1);
  CHECK(alone[0].pbar == both[1].pbar);
  CHECK(alone[0].uptake == both[1].uptake);
}

TEST_CASE("theta sweep replaces a configured heartwood radius") {
  Scenario sc;
  sc.overrides.set("R_sap", 0.01);
  const ModelParams p = params_for(sc, std::pair<std::string, double>{"theta", 0.35});
  CHECK(p.R_sap == doctest::Approx(0.35 * 0.07));
}

TEST_CASE("csv forcing shorter than the run is an ingest error") {
  const fs::path d = scratch("csv");
  fs::create_directories(d);
  {
    std::ofstream out(d / "t.csv");
    out << "time,temp_c\n";
    for (int k = 0; k <= 16; ++k) out << 900 * k << "," << 2.0 - 0.25 * k << "\n";
  }
  Scenario sc = short_scenario(4);
  sc.forcing = parse_forcing("csv:" + (d / "t.csv").string());
  sc.forcing.smoothing_passes = 2;
  const RunOutput ok = run_single(sc, params_for(sc, std::nullopt));
  CHECK(ok.time.size() == 17);
  REQUIRE(ok.events.size() == 1);
  CHECK(ok.events[0].kind == CrossingKind::freeze);
  sc.duration = 5 * 3600.0;
  CHECK_THROWS_AS(run_single(sc, params_for(sc, std::nullopt)), IngestError);
  fs::remove_all(d);
}

}
