#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/config.hpp"
#include "twinlink/latency_model.hpp"
#include "twinlink/session.hpp"

namespace twinlink::trials {

// ---------------------------------------------------------------------------
// Small statistics helpers
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean{0.0};
  double std{0.0};
  std::size_t n{0};
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  m.n = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

inline nlohmann::json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"n", m.n}}; }

// ---------------------------------------------------------------------------
// Default desk-scale world
// ---------------------------------------------------------------------------

// A wall 30 m ahead of the start point on the +x approach axis, and six base
// stations: two close ones whose 2D Voronoi boundary crosses the horizontal
// measurement path near x = 50 m, four farther ones that only compete once
// the UAV climbs above the antenna downtilt altitude.
inline WorldModel default_world() {
  WorldModel w;
  w.origin = {59.3293, 18.0686, 0.0};
  w.bounds = {{-500.0, -500.0, 0.0}, {500.0, 500.0, 200.0}};
  w.obstacles.push_back({{30.0, -10.0, 0.0}, {31.0, 10.0, 30.0}});
  w.base_stations = {
      {"cell-101", {-60.0, 40.0, 25.0}, 20.0},   {"cell-102", {160.0, -40.0, 25.0}, 20.0},
      {"cell-103", {40.0, 260.0, 30.0}, 20.0},   {"cell-104", {-220.0, -180.0, 30.0}, 20.0},
      {"cell-105", {300.0, 250.0, 30.0}, 20.0},  {"cell-106", {250.0, -300.0, 30.0}, 20.0},
  };
  return w;
}

inline TwinConfig default_config() {
  TwinConfig c;
  c.world = default_world();
  return c;
}

// ---------------------------------------------------------------------------
// Measurement scenarios
// ---------------------------------------------------------------------------

enum class Scenario { kAltitude, kHorizontal };

inline Scenario scenario_from_string(const std::string& s) {
  if (s == "altitude") return Scenario::kAltitude;
  if (s == "horizontal") return Scenario::kHorizontal;
  throw std::invalid_argument("unknown scenario '" + s + "' (expected altitude|horizontal)");
}

inline const char* to_string(Scenario s) { return s == Scenario::kAltitude ? "altitude" : "horizontal"; }

struct ScenarioShape {
  double sample_hz{10.0};
  // altitude: hover point, climb rate, ceiling, number of up/down cycles
  Vec3 hover_point{0.0, 0.0, 0.0};
  double climb_rate_mps{1.0};
  double max_alt_m{130.0};
  int altitude_cycles{20};
  // horizontal: fixed altitude, path length along +x, cruise speed, legs
  double cruise_alt_m{10.0};
  double path_length_m{100.0};
  double cruise_speed_mps{5.0};
  int horizontal_legs{6};
};

// Vertical climb/descent 0 -> max_alt -> 0 at a fixed ground point.
inline std::vector<TrajectorySample> altitude_trajectory(const ScenarioShape& s = {}) {
  std::vector<TrajectorySample> out;
  const double dt = 1.0 / s.sample_hz;
  const double leg_s = s.max_alt_m / s.climb_rate_mps;
  const auto per_leg = static_cast<std::int64_t>(std::llround(leg_s / dt));
  std::int64_t k = 0;
  for (int cycle = 0; cycle < s.altitude_cycles; ++cycle) {
    for (int dir = 0; dir < 2; ++dir) {
      for (std::int64_t i = 0; i < per_leg; ++i, ++k) {
        const double frac = static_cast<double>(i) / static_cast<double>(per_leg);
        const double alt = dir == 0 ? frac * s.max_alt_m : (1.0 - frac) * s.max_alt_m;
        out.push_back({static_cast<std::int64_t>(std::llround(static_cast<double>(k) * dt * 1000.0)),
                       {s.hover_point.x, s.hover_point.y, alt},
                       s.climb_rate_mps});
      }
    }
  }
  return out;
}

// Back-and-forth along +x at fixed altitude.
inline std::vector<TrajectorySample> horizontal_trajectory(const ScenarioShape& s = {}) {
  std::vector<TrajectorySample> out;
  const double dt = 1.0 / s.sample_hz;
  const auto per_leg = static_cast<std::int64_t>(std::llround(s.path_length_m / s.cruise_speed_mps / dt));
  std::int64_t k = 0;
  for (int leg = 0; leg < s.horizontal_legs; ++leg) {
    for (std::int64_t i = 0; i < per_leg; ++i, ++k) {
      const double frac = static_cast<double>(i) / static_cast<double>(per_leg);
      const double x = leg % 2 == 0 ? frac * s.path_length_m : (1.0 - frac) * s.path_length_m;
      out.push_back({static_cast<std::int64_t>(std::llround(static_cast<double>(k) * dt * 1000.0)),
                     {x, 0.0, s.cruise_alt_m},
                     s.cruise_speed_mps});
    }
  }
  return out;
}

struct BandRow {
  double lo{0.0};
  double hi{0.0};
  std::size_t samples{0};
  std::size_t handovers{0};
  double handover_rate{0.0};  // handovers per sample
  double mean_throughput_mbps{0.0};
  double mean_nl_ms{0.0};
};

struct MeasurementReport {
  Scenario scenario{Scenario::kAltitude};
  std::vector<LatencyRecord> records;
  std::vector<BandRow> bands;  // altitude bands (altitude) or x bins (horizontal)
  std::set<std::string> cells;
  std::size_t handovers{0};
  double mean_throughput_below_mbps{0.0};
  double mean_throughput_above_mbps{0.0};
  double mean_nl_ms{0.0};
};

// Bins records by a coordinate (z for altitude bands, x for path bins).
// Handover = serving cell differs from the previous record's.
inline std::vector<BandRow> bin_records(const std::vector<LatencyRecord>& recs, int axis, double width, double lo,
                                        double hi) {
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / width));
  std::vector<BandRow> rows(n);
  std::vector<double> tput(n, 0.0), nl(n, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    rows[b].lo = lo + width * static_cast<double>(b);
    rows[b].hi = rows[b].lo + width;
  }
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const double v = recs[i].position[axis];
    auto b = static_cast<std::int64_t>(std::floor((v - lo) / width));
    b = std::clamp<std::int64_t>(b, 0, static_cast<std::int64_t>(n) - 1);
    auto& row = rows[static_cast<std::size_t>(b)];
    ++row.samples;
    if (i > 0 && recs[i].cell_id != recs[i - 1].cell_id) ++row.handovers;
    tput[static_cast<std::size_t>(b)] += recs[i].throughput_mbps;
    nl[static_cast<std::size_t>(b)] += recs[i].nl_ms;
  }
  for (std::size_t b = 0; b < n; ++b) {
    if (rows[b].samples == 0) continue;
    const auto s = static_cast<double>(rows[b].samples);
    rows[b].handover_rate = static_cast<double>(rows[b].handovers) / s;
    rows[b].mean_throughput_mbps = tput[b] / s;
    rows[b].mean_nl_ms = nl[b] / s;
  }
  return rows;
}

inline MeasurementReport run_measurement_scenario(const TwinConfig& cfg, Scenario scenario, std::uint64_t seed,
                                                  const ScenarioShape& shape = {}) {
  if (cfg.world.base_stations.size() < 2) {
    throw std::invalid_argument("measurement scenarios need at least two base stations");
  }
  MeasurementReport r;
  r.scenario = scenario;
  const auto traj = scenario == Scenario::kAltitude ? altitude_trajectory(shape) : horizontal_trajectory(shape);
  r.records = generate_measurements(cfg.world, traj, cfg.radio, derive_seed(seed, {static_cast<std::uint64_t>(Stream::kMeasurementNoise)}));

  std::vector<double> below, above, nls;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    r.cells.insert(rec.cell_id);
    if (i > 0 && rec.cell_id != r.records[i - 1].cell_id) ++r.handovers;
    (rec.alt > cfg.radio.altitude_threshold_m ? above : below).push_back(rec.throughput_mbps);
    nls.push_back(rec.nl_ms);
  }
  r.mean_throughput_below_mbps = mean_std(below).mean;
  r.mean_throughput_above_mbps = mean_std(above).mean;
  r.mean_nl_ms = mean_std(nls).mean;
  r.bands = scenario == Scenario::kAltitude ? bin_records(r.records, 2, 10.0, 0.0, shape.max_alt_m)
                                            : bin_records(r.records, 0, 20.0, 0.0, shape.path_length_m);
  return r;
}

inline nlohmann::json to_json(const BandRow& b) {
  return {{"lo", b.lo},
          {"hi", b.hi},
          {"samples", b.samples},
          {"handovers", b.handovers},
          {"handover_rate", b.handover_rate},
          {"mean_throughput_mbps", b.mean_throughput_mbps},
          {"mean_nl_ms", b.mean_nl_ms}};
}

inline nlohmann::json to_json(const MeasurementReport& r) {
  nlohmann::json bands = nlohmann::json::array();
  for (const auto& b : r.bands) bands.push_back(to_json(b));
  return {{"scenario", to_string(r.scenario)},
          {"records", r.records.size()},
          {"distinct_cells", r.cells.size()},
          {"cells", r.cells},
          {"handovers", r.handovers},
          {"mean_throughput_below_mbps", r.mean_throughput_below_mbps},
          {"mean_throughput_above_mbps", r.mean_throughput_above_mbps},
          {"mean_nl_ms", r.mean_nl_ms},
          {r.scenario == Scenario::kAltitude ? "altitude_bands" : "path_bins", bands}};
}

// ---------------------------------------------------------------------------
// Collision trials
// ---------------------------------------------------------------------------

struct TrialSettings {
  double speed_min_mps{1.0};
  double speed_max_mps{5.0};
  double command_hz{20.0};
  double stop_speed_mps{0.05};  // "stopped" below this
  double max_sim_s{120.0};
};

struct RunRecord {
  int index{0};
  bool dc{false};
  double speed_mps{0.0};
  double injected_latency_ms{0.0};  // realized latency of the stop command
  double twin_stop_x{0.0};
  double physical_stop_x{0.0};
  double reference_stop_x{0.0};  // uncompensated twin stop for the same seed
  double d_delta_m{0.0};
  double tcl_ms{0.0};
  std::int64_t denial_tick{-1};
  bool collision{false};
  bool timed_out{false};
  double twin_clearance_m{0.0};
  double physical_clearance_m{0.0};
  std::vector<double> command_latencies_ms;
};

struct ArmSummary {
  MeanStd cl;       // realized latency over every dispatched command
  MeanStd injected; // stop-command latency per run
  MeanStd tcl;
  std::size_t collisions{0};
  std::size_t timeouts{0};
};

struct TrialReport {
  std::vector<RunRecord> off;
  std::vector<RunRecord> on;
  std::optional<ArmSummary> off_summary;
  std::optional<ArmSummary> on_summary;
  std::optional<double> reduction_pct;
  bool degenerate{false};
  std::uint64_t seed{0};
};

// Approach-axis clearance from `x` to the first obstacle face ahead (+x).
inline double clearance_ahead(const WorldModel& w, const Vec3& p) {
  if (w.inside_obstacle(p)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : w.obstacles) {
    if (auto t = ray_box_distance(p, {1.0, 0.0, 0.0}, b)) best = std::min(best, *t);
  }
  return best;
}

// Adds a generated horizontal-scenario measurement database when the link or
// the decision engine would otherwise look up an empty one.
inline TwinConfig prepare_config(TwinConfig cfg, std::uint64_t seed) {
  if (cfg.world.obstacles.empty()) throw std::invalid_argument("collision trials need an obstacle on the approach path");
  if ((!cfg.measurements || cfg.measurements->empty()) && cfg.world.base_stations.size() >= 2) {
    auto m = run_measurement_scenario(cfg, Scenario::kHorizontal, derive_seed(seed, {0x6d656173ULL}));
    cfg.measurements = std::make_shared<MeasurementDb>(std::move(m.records), cfg.radio.fallback_nl_ms);
  }
  return cfg;
}

// One scripted approach. Both UAVs start in steady cruise at `speed` along +x
// holding the same forward command; the script keeps streaming forward
// commands at command_hz until the first denial, then goes quiet. The run
// ends once the stop has been delivered and both UAVs are stopped.
inline RunRecord run_single(const TwinConfig& cfg, double speed, std::uint64_t run_seed, bool dc,
                            const TrialSettings& ts = {}) {
  TwinConfig c = cfg;
  c.decision.dc_enabled = dc;
  c.seed = run_seed;

  SessionStart start;
  start.state.position = c.server.start_position;
  start.state.heading = 0.0;
  start.state.velocity = {speed, 0.0, 0.0};
  start.active = PilotCommand{0, 0, {speed, 0.0, 0.0}, 0.0, CommandKind::kMotion};

  Session s(0, c, Environment::from_config(c, run_seed), run_seed, start);
  const double tick_ms = c.dynamics.tick_ms();
  const auto cmd_every = std::max<std::int64_t>(1, std::llround(1000.0 / ts.command_hz / tick_ms));
  const auto max_ticks = static_cast<std::int64_t>(std::ceil(ts.max_sim_s * 1000.0 / tick_ms));

  RunRecord r;
  r.dc = dc;
  r.speed_mps = speed;
  std::uint64_t seq = 1;
  bool denied = false;
  double min_twin = std::numeric_limits<double>::infinity();
  double min_phys = std::numeric_limits<double>::infinity();
  std::int64_t t = 0;
  for (; t < max_ticks; ++t) {
    if (!denied && t % cmd_every == 0) {
      s.submit({seq++, static_cast<std::int64_t>(std::llround(static_cast<double>(t) * tick_ms)),
                {speed, 0.0, 0.0}, 0.0, CommandKind::kMotion});
    }
    const auto f = s.run_tick();
    for (const auto& ev : f.decisions) {
      r.command_latencies_ms.push_back(ev.realized_latency_ms);
      if (ev.decision.verdict == Verdict::kDeniedStop && !denied) {
        denied = true;
        r.denial_tick = f.tick;
        r.injected_latency_ms = ev.realized_latency_ms;
      }
    }
    r.collision = r.collision || f.twin_contact || f.physical_contact;
    min_twin = std::min(min_twin, clearance_ahead(c.world, f.twin.position));
    min_phys = std::min(min_phys, clearance_ahead(c.world, f.physical.position));
    if (denied && s.pending_on_link() == 0 && f.twin.speed < ts.stop_speed_mps &&
        f.physical.speed < ts.stop_speed_mps) {
      break;
    }
  }
  r.timed_out = t >= max_ticks;
  r.twin_stop_x = s.twin().position.x;
  r.physical_stop_x = s.physical().position.x;
  r.twin_clearance_m = min_twin;
  r.physical_clearance_m = min_phys;
  r.collision = r.collision || min_twin <= 0.0 || min_phys <= 0.0;
  return r;
}

// D_delta is the physical stop position measured against the uncompensated
// twin's stop position; TCL = D_delta / speed.
inline void finish_run(RunRecord& r, double reference_stop_x) {
  r.reference_stop_x = reference_stop_x;
  r.d_delta_m = std::abs(r.physical_stop_x - reference_stop_x);
  r.tcl_ms = r.speed_mps > 0.0 ? r.d_delta_m / r.speed_mps * 1000.0 : 0.0;
}

inline ArmSummary summarize(const std::vector<RunRecord>& runs) {
  ArmSummary s;
  std::vector<double> all, inj, tcl;
  for (const auto& r : runs) {
    all.insert(all.end(), r.command_latencies_ms.begin(), r.command_latencies_ms.end());
    inj.push_back(r.injected_latency_ms);
    tcl.push_back(r.tcl_ms);
    s.collisions += r.collision ? 1 : 0;
    s.timeouts += r.timed_out ? 1 : 0;
  }
  s.cl = mean_std(all);
  s.injected = mean_std(inj);
  s.tcl = mean_std(tcl);
  return s;
}

enum class Arms { kOff, kOn, kBoth };

inline Arms arms_from_string(const std::string& s) {
  if (s == "off") return Arms::kOff;
  if (s == "on") return Arms::kOn;
  if (s == "both") return Arms::kBoth;
  throw std::invalid_argument("--dc must be on|off|both");
}

// Runs `runs` paired approaches. Speeds ~ U[speed_min, speed_max] and per-run
// seeds are shared by both arms, so arm differences come from compensation.
inline TrialReport run_collision_trials(const TwinConfig& base, int runs, Arms arms, std::uint64_t seed,
                                        const TrialSettings& ts = {}) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  const TwinConfig cfg = prepare_config(base, seed);
  {
    const auto ld = lidar_range(cfg.world, cfg.server.start_position, forward_axis(0.0), cfg.server.lidar_range_m * 1e3);
    if (!ld) throw std::invalid_argument("no obstacle on the +x approach path from the start position");
  }

  TrialReport rep;
  rep.seed = seed;
  auto speed_rng = make_rng(seed, Stream::kTrialSpeeds);
  std::uniform_real_distribution<double> speed_dist(ts.speed_min_mps, ts.speed_max_mps);
  for (int i = 0; i < runs; ++i) {
    const double speed = speed_dist(speed_rng);
    const std::uint64_t run_seed = derive_seed(seed, {static_cast<std::uint64_t>(i)});
    RunRecord off = run_single(cfg, speed, run_seed, false, ts);
    off.index = i;
    finish_run(off, off.twin_stop_x);
    if (arms != Arms::kOn) rep.off.push_back(off);
    if (arms != Arms::kOff) {
      RunRecord on = run_single(cfg, speed, run_seed, true, ts);
      on.index = i;
      finish_run(on, off.twin_stop_x);
      rep.on.push_back(std::move(on));
    }
  }
  if (!rep.off.empty()) rep.off_summary = summarize(rep.off);
  if (!rep.on.empty()) rep.on_summary = summarize(rep.on);
  if (rep.off_summary && rep.on_summary) {
    const double tick_ms = cfg.dynamics.tick_ms();
    if (rep.off_summary->tcl.mean < tick_ms) {
      rep.degenerate = true;
      rep.reduction_pct = 0.0;
    } else {
      rep.reduction_pct = 100.0 * (1.0 - rep.on_summary->tcl.mean / rep.off_summary->tcl.mean);
    }
  }
  return rep;
}

inline TrialReport compare_dc(const TwinConfig& cfg, int runs, std::uint64_t seed, const TrialSettings& ts = {}) {
  return run_collision_trials(cfg, runs, Arms::kBoth, seed, ts);
}

// ---------------------------------------------------------------------------
// Acceptance checks on a trial report
// ---------------------------------------------------------------------------

inline constexpr double kTclTolerance = 0.20;       // mean TCL vs mean injected latency, relative
inline constexpr double kMinReductionPct = 40.0;

struct Check {
  std::string name;
  bool pass{false};
  std::string detail;
};

inline std::vector<Check> check_report(const TrialReport& rep) {
  std::vector<Check> out;
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  if (rep.off_summary) {
    const auto& s = *rep.off_summary;
    const double rel = s.injected.mean > 0.0 ? std::abs(s.tcl.mean - s.injected.mean) / s.injected.mean : 0.0;
    out.push_back({"tcl_matches_injected_latency", rel <= kTclTolerance,
                   "mean TCL " + fmt(s.tcl.mean) + " ms vs injected " + fmt(s.injected.mean) + " ms (" +
                       fmt(100.0 * rel) + "% off, limit 20%)"});
  }
  if (rep.reduction_pct) {
    out.push_back({"dc_reduction", !rep.degenerate && *rep.reduction_pct >= kMinReductionPct,
                   "reduction " + fmt(*rep.reduction_pct) + "% (need >= 40%)" + (rep.degenerate ? ", degenerate" : "")});
  }
  if (rep.on_summary) {
    out.push_back({"dc_no_collisions", rep.on_summary->collisions == 0,
                   std::to_string(rep.on_summary->collisions) + " collision(s) with compensation"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ArmSummary& s) {
  return {{"cl_ms", to_json(s.cl)},
          {"injected_latency_ms", to_json(s.injected)},
          {"tcl_ms", to_json(s.tcl)},
          {"collisions", s.collisions},
          {"timeouts", s.timeouts}};
}

inline nlohmann::json to_json(const TrialReport& r) {
  nlohmann::json j = {{"seed", r.seed}, {"runs", std::max(r.off.size(), r.on.size())}, {"degenerate", r.degenerate}};
  if (r.off_summary) j["dc_off"] = to_json(*r.off_summary);
  if (r.on_summary) j["dc_on"] = to_json(*r.on_summary);
  j["reduction_pct"] = r.reduction_pct ? nlohmann::json(*r.reduction_pct) : nlohmann::json();
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : check_report(r)) checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  j["checks"] = checks;
  return j;
}

inline const char* kRunsCsvHeader =
    "run,dc,speed_mps,injected_latency_ms,d_delta_m,tcl_ms,twin_stop_x,physical_stop_x,reference_stop_x,"
    "collision,timed_out,twin_clearance_m,physical_clearance_m";

inline void write_runs_csv(std::ostream& out, const TrialReport& r) {
  out << kRunsCsvHeader << '\n';
  out << std::setprecision(10);
  for (const auto* arm : {&r.off, &r.on}) {
    for (const auto& run : *arm) {
      out << run.index << ',' << (run.dc ? "on" : "off") << ',' << run.speed_mps << ',' << run.injected_latency_ms
          << ',' << run.d_delta_m << ',' << run.tcl_ms << ',' << run.twin_stop_x << ',' << run.physical_stop_x << ','
          << run.reference_stop_x << ',' << (run.collision ? 1 : 0) << ',' << (run.timed_out ? 1 : 0) << ','
          << run.twin_clearance_m << ',' << run.physical_clearance_m << '\n';
    }
  }
}

struct CsvRun {
  int run{0};
  bool dc{false};
  double injected_latency_ms{0.0};
  double tcl_ms{0.0};
};

inline std::vector<CsvRun> read_runs_csv(std::istream& in) {
  std::vector<CsvRun> out;
  std::string line;
  std::getline(in, line);
  if (line != kRunsCsvHeader) throw ConfigError("runs.csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 6) throw ConfigError("runs.csv: short row");
    out.push_back({std::stoi(cells[0]), cells[1] == "on", std::stod(cells[3]), std::stod(cells[5])});
  }
  return out;
}

// Grouped bar chart per run: injected latency, TCL (no compensation) and
// TCL with compensation, with dashed mean lines.
inline std::string latency_comparison_svg(const std::vector<CsvRun>& runs) {
  std::map<int, std::array<std::optional<double>, 3>> by_run;
  for (const auto& r : runs) {
    auto& slot = by_run[r.run];
    if (!r.dc) {
      slot[0] = r.injected_latency_ms;
      slot[1] = r.tcl_ms;
    } else {
      slot[2] = r.tcl_ms;
    }
  }
  double ymax = 50.0;
  std::array<std::vector<double>, 3> series;
  for (auto& [_, s] : by_run) {
    for (int k = 0; k < 3; ++k) {
      if (s[k]) {
        ymax = std::max(ymax, *s[k]);
        series[k].push_back(*s[k]);
      }
    }
  }
  ymax = std::ceil(ymax * 1.1 / 50.0) * 50.0;

  const double W = 900, H = 420, L = 60, R = 20, T = 40, B = 50;
  const double plot_w = W - L - R, plot_h = H - T - B;
  const auto groups = std::max<std::size_t>(1, by_run.size());
  const double gw = plot_w / static_cast<double>(groups);
  const double bw = gw * 0.25;
  const char* colors[3] = {"#4c72b0", "#dd8452", "#55a868"};
  const char* labels[3] = {"measured CL", "TCL", "TCL with DC"};
  auto y = [&](double v) { return T + plot_h * (1.0 - v / ymax); };

  std::ostringstream o;
  o << std::fixed << std::setprecision(1);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << "Measured latency vs latency deduced from stop distances</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = ymax * i / 5.0;
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y(v) << "\" y2=\"" << y(v)
      << "\" stroke=\"#ddd\"/>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << v << "</text>\n";
  }
  o << "<text x=\"16\" y=\"" << T + plot_h / 2 << "\" transform=\"rotate(-90 16 " << T + plot_h / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">latency (ms)</text>\n";
  std::size_t g = 0;
  for (const auto& [run, s] : by_run) {
    const double x0 = L + gw * static_cast<double>(g) + gw * 0.125;
    for (int k = 0; k < 3; ++k) {
      if (!s[k]) continue;
      o << "<rect x=\"" << x0 + bw * k << "\" y=\"" << y(*s[k]) << "\" width=\"" << bw * 0.9 << "\" height=\""
        << (T + plot_h - y(*s[k])) << "\" fill=\"" << colors[k] << "\"/>\n";
    }
    o << "<text x=\"" << x0 + bw * 1.5 << "\" y=\"" << H - B + 16
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << run << "</text>\n";
    ++g;
  }
  for (int k = 0; k < 3; ++k) {
    if (series[k].empty()) continue;
    const double m = mean_std(series[k]).mean;
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y(m) << "\" y2=\"" << y(m) << "\" stroke=\""
      << colors[k] << "\" stroke-dasharray=\"6 4\"/>\n";
    o << "<rect x=\"" << L + 10 + 170 * k << "\" y=\"" << H - 18 << "\" width=\"12\" height=\"12\" fill=\""
      << colors[k] << "\"/>\n";
    o << "<text x=\"" << L + 26 + 170 * k << "\" y=\"" << H - 8 << "\" font-family=\"sans-serif\" font-size=\"12\">"
      << labels[k] << " (mean " << m << ")</text>\n";
  }
  o << "<line x1=\"" << L << "\" x2=\"" << L << "\" y1=\"" << T << "\" y2=\"" << T + plot_h << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << T + plot_h << "\" y2=\"" << T + plot_h
    << "\" stroke=\"black\"/>\n";
  o << "</svg>\n";
  return o.str();
}

// Writes summary.json, runs.csv and latency_comparison.svg into `dir`.
inline void write_trial_outputs(const std::filesystem::path& dir, const TrialReport& r) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.json");
    out << to_json(r).dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "runs.csv");
    write_runs_csv(out, r);
  }
  std::ostringstream csv;
  write_runs_csv(csv, r);
  std::istringstream in(csv.str());
  std::ofstream svg(dir / "latency_comparison.svg");
  svg << latency_comparison_svg(read_runs_csv(in));
}

}  // namespace twinlink::trials
