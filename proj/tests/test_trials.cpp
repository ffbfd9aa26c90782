#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "twinlink/trials.hpp"

using namespace twinlink;
using namespace twinlink::trials;

namespace {

TwinConfig constant_latency(double latency_ms) {
  TwinConfig c = default_config();
  c.link.cl_mean_ms = latency_ms;
  c.link.cl_std_ms = 0.0;
  c.link.nl_source = NlSource::kZero;
  return c;
}

// Expected gap for a delayed stop: the uncompensated twin stops where the
// stop took effect; the physical copy keeps cruising for the link delay.
double oracle_tcl_ms(double d_delta_m, double speed) { return d_delta_m / speed * 1000.0; }

}  // namespace

TEST(Tcl, ConstantLatencyRecoveredFromStopGap) {
  const auto cfg = prepare_config(constant_latency(150.0), 1);
  auto r = run_single(cfg, 4.0, 11, false);
  finish_run(r, r.twin_stop_x);
  ASSERT_FALSE(r.timed_out);
  EXPECT_EQ(r.injected_latency_ms, 150.0);
  EXPECT_NEAR(r.d_delta_m, 0.6, 2 * 0.01 * 4.0);
  EXPECT_NEAR(r.tcl_ms, 150.0, 20.0);
  EXPECT_DOUBLE_EQ(r.tcl_ms, oracle_tcl_ms(std::abs(r.physical_stop_x - r.twin_stop_x), 4.0));
}

TEST(Tcl, ZeroLatencyGivesNoGap) {
  const auto cfg = prepare_config(constant_latency(0.0), 1);
  auto r = run_single(cfg, 3.0, 5, false);
  finish_run(r, r.twin_stop_x);
  EXPECT_LT(r.d_delta_m, 3.0 * 0.01);
  EXPECT_LT(r.tcl_ms, 10.0);
}

TEST(Tcl, UncompensatedTwinHonoursThreshold) {
  const auto cfg = prepare_config(constant_latency(150.0), 1);
  for (double v : {1.0, 3.0, 5.0}) {
    const auto r = run_single(cfg, v, 2, false);
    EXPECT_GT(r.twin_clearance_m, 0.0) << v;
    EXPECT_FALSE(r.timed_out);
  }
}

TEST(Compensation, ExactLatencyKnowledgeCancelsTheDelay) {
  // Link latency is exactly the decision engine's CL and ENL is zero, so the
  // widened gate fires exactly as early as the stop arrives late.
  TwinConfig c = constant_latency(150.0);
  c.decision.cl_ms = 150.0;
  LatencyRecord zero_nl;
  zero_nl.cell_id = "cell-101";
  c.measurements = std::make_shared<MeasurementDb>(std::vector<LatencyRecord>{zero_nl});
  TrialSettings ts;
  ts.command_hz = 100.0;  // one decision per tick, so gate timing is tick-exact
  const auto rep = compare_dc(c, 6, 3, ts);
  ASSERT_TRUE(rep.on_summary);
  for (const auto& r : rep.on) {
    EXPECT_LE(r.tcl_ms, 20.0) << "run " << r.index << " speed " << r.speed_mps;
    EXPECT_FALSE(r.collision);
  }
  EXPECT_GT(*rep.reduction_pct, 80.0);
}

TEST(Compensation, ZeroLatencyIsFlaggedDegenerate) {
  TwinConfig c = constant_latency(0.0);
  const auto rep = compare_dc(c, 3, 9);
  EXPECT_TRUE(rep.degenerate);
  ASSERT_TRUE(rep.reduction_pct);
  EXPECT_EQ(*rep.reduction_pct, 0.0);
  bool reduction_failed = false;
  for (const auto& chk : check_report(rep)) {
    if (chk.name == "dc_reduction") reduction_failed = !chk.pass;
  }
  EXPECT_TRUE(reduction_failed);
}

TEST(Compensation, PairedSeedsReproduce) {
  const auto a = compare_dc(default_config(), 4, 17);
  const auto b = compare_dc(default_config(), 4, 17);
  EXPECT_EQ(to_json(a), to_json(b));
  const auto c = compare_dc(default_config(), 4, 18);
  EXPECT_NE(to_json(a), to_json(c));
}

TEST(Compensation, CompensatedArmNeverStopsLater) {
  const auto rep = compare_dc(default_config(), 10, 5);
  ASSERT_EQ(rep.off.size(), rep.on.size());
  for (std::size_t i = 0; i < rep.on.size(); ++i) {
    EXPECT_EQ(rep.on[i].speed_mps, rep.off[i].speed_mps);
    EXPECT_LE(rep.on[i].twin_stop_x, rep.off[i].twin_stop_x + 1e-9);
    EXPECT_LE(rep.on[i].physical_stop_x, rep.off[i].physical_stop_x + 1e-9);
  }
}

TEST(Compensation, ArmsSelection) {
  const auto off = run_collision_trials(default_config(), 2, Arms::kOff, 1);
  EXPECT_EQ(off.on.size(), 0u);
  EXPECT_FALSE(off.reduction_pct);
  const auto on = run_collision_trials(default_config(), 2, Arms::kOn, 1);
  EXPECT_EQ(on.off.size(), 0u);
  EXPECT_EQ(on.on.size(), 2u);
  EXPECT_THROW(arms_from_string("maybe"), std::invalid_argument);
  EXPECT_THROW(run_collision_trials(default_config(), 0, Arms::kBoth, 1), std::invalid_argument);
}

TEST(Compensation, NeedsAnObstacleAhead) {
  TwinConfig c = default_config();
  c.world.obstacles.clear();
  EXPECT_THROW(compare_dc(c, 1, 1), std::invalid_argument);
}

TEST(Scenarios, AltitudeThroughputRegimes) {
  const auto rep = run_measurement_scenario(default_config(), Scenario::kAltitude, 1);
  EXPECT_NEAR(rep.mean_throughput_below_mbps, 60.0, 12.0);
  EXPECT_NEAR(rep.mean_throughput_above_mbps, 10.0, 2.0);
  ASSERT_EQ(rep.bands.size(), 13u);
  EXPECT_EQ(rep.bands.front().lo, 0.0);
}

TEST(Scenarios, HorizontalSeesSeveralCells) {
  const auto rep = run_measurement_scenario(default_config(), Scenario::kHorizontal, 1);
  EXPECT_GE(rep.cells.size(), 2u);
  EXPECT_GT(rep.handovers, 0u);
  for (const auto& r : rep.records) EXPECT_NEAR(r.alt, 10.0, 1e-6);
}

TEST(Scenarios, RequireTwoStations) {
  TwinConfig c = default_config();
  c.world.base_stations.resize(1);
  EXPECT_THROW(run_measurement_scenario(c, Scenario::kHorizontal, 1), std::invalid_argument);
  EXPECT_THROW(scenario_from_string("diagonal"), std::invalid_argument);
}

TEST(Stats, MeanStd) {
  const auto m = mean_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std, std::sqrt(5.0 / 3.0), 1e-12);
  EXPECT_EQ(mean_std({}).n, 0u);
}

TEST(Outputs, CsvRoundTripAndSvg) {
  const auto rep = compare_dc(default_config(), 3, 2);
  std::ostringstream csv;
  write_runs_csv(csv, rep);
  std::istringstream in(csv.str());
  const auto rows = read_runs_csv(in);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_FALSE(rows[0].dc);
  EXPECT_TRUE(rows[3].dc);
  EXPECT_NEAR(rows[1].tcl_ms, rep.off[1].tcl_ms, 1e-6);
  const auto svg = latency_comparison_svg(rows);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("TCL with DC"), std::string::npos);

  std::istringstream bad("nope\n1,2\n");
  EXPECT_THROW(read_runs_csv(bad), ConfigError);

  const auto dir = std::filesystem::temp_directory_path() / "twinlink_trial_out";
  std::filesystem::remove_all(dir);
  write_trial_outputs(dir, rep);
  for (const char* f : {"summary.json", "runs.csv", "latency_comparison.svg"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream s(dir / "summary.json");
  const auto j = nlohmann::json::parse(s);
  EXPECT_EQ(j.at("seed"), 2);
  EXPECT_EQ(j.at("checks").size(), 3u);
}
