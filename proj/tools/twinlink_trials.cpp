// twinlink-trials: desk-scale collision and measurement experiments.
//
//   twinlink-trials collision --runs 20 --dc both --seed 1 --out out/
//   twinlink-trials measure --scenario altitude --out out/
//   twinlink-trials generate-measurements --world w.json --scenario horizontal --seed 3 --out db.jsonl
//   twinlink-trials report --in out/

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "twinlink/config.hpp"
#include "twinlink/trials.hpp"

namespace fs = std::filesystem;
using namespace twinlink;

namespace {

TwinConfig base_config(const std::string& config_path, const std::string& world_path) {
  TwinConfig cfg = config_path.empty() ? trials::default_config() : load_config(config_path);
  if (!world_path.empty()) cfg.world = load_world(world_path);
  return cfg;
}

void print_bands(std::ostream& out, const trials::MeasurementReport& r) {
  out << (r.scenario == trials::Scenario::kAltitude ? "altitude band" : "x bin") << "      samples  handovers"
      << "  rate     tput_mbps  nl_ms\n";
  out << std::fixed << std::setprecision(3);
  for (const auto& b : r.bands) {
    out << std::setw(6) << b.lo << "-" << std::setw(7) << std::left << b.hi << std::right << std::setw(8)
        << b.samples << std::setw(11) << b.handovers << std::setw(9) << b.handover_rate << std::setw(12)
        << b.mean_throughput_mbps << std::setw(8) << b.mean_nl_ms << '\n';
  }
  out << "distinct cells: " << r.cells.size() << ", handovers: " << r.handovers
      << ", throughput below/above threshold: " << r.mean_throughput_below_mbps << " / "
      << r.mean_throughput_above_mbps << " Mbps, mean NL " << r.mean_nl_ms << " ms\n";
}

void print_trial_summary(std::ostream& out, const trials::TrialReport& r) {
  out << std::fixed << std::setprecision(2);
  auto arm = [&](const char* name, const trials::ArmSummary& s) {
    out << name << ": CL " << s.cl.mean << " +/- " << s.cl.std << " ms, injected " << s.injected.mean << " +/- "
        << s.injected.std << " ms, TCL " << s.tcl.mean << " +/- " << s.tcl.std << " ms, collisions "
        << s.collisions << ", timeouts " << s.timeouts << '\n';
  };
  if (r.off_summary) arm("dc off", *r.off_summary);
  if (r.on_summary) arm("dc on ", *r.on_summary);
  if (r.reduction_pct) out << "reduction: " << *r.reduction_pct << "%" << (r.degenerate ? " (degenerate)" : "") << '\n';
}

int report_checks(const std::vector<trials::Check>& checks) {
  int failed = 0;
  for (const auto& c : checks) {
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    failed += c.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinlink-trials: collision and measurement experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string world_path;
  std::uint64_t seed = 1;
  app.add_option("--config", config_path, "Config file (JSON); defaults to the built-in desk-scale setup");

  auto* collision = app.add_subcommand("collision", "Approach an obstacle with and without delay compensation");
  int runs = 20;
  std::string dc = "both";
  std::string out_dir = "trial-out";
  collision->add_option("--runs", runs, "Number of runs per arm")->check(CLI::PositiveNumber);
  collision->add_option("--dc", dc, "on|off|both")->check(CLI::IsMember({"on", "off", "both"}));
  collision->add_option("--seed", seed, "Seed");
  collision->add_option("--out", out_dir, "Output directory");
  collision->add_option("--world", world_path, "World file overriding the config's world");

  auto* measure = app.add_subcommand("measure", "Fly a measurement trajectory and tabulate handover/throughput");
  std::string scenario = "altitude";
  std::string measure_out;
  measure->add_option("--scenario", scenario, "altitude|horizontal")->check(CLI::IsMember({"altitude", "horizontal"}));
  measure->add_option("--seed", seed, "Seed");
  measure->add_option("--out", measure_out, "Output directory (records + tables)");
  measure->add_option("--world", world_path, "World file");

  auto* gen = app.add_subcommand("generate-measurements", "Write a measurement database (JSONL)");
  std::string gen_out;
  gen->add_option("--world", world_path, "World file");
  gen->add_option("--scenario", scenario, "altitude|horizontal")->check(CLI::IsMember({"altitude", "horizontal"}));
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", gen_out, "Output JSONL file")->required();

  auto* report = app.add_subcommand("report", "Print tables and render plots for a collision output directory");
  std::string in_dir;
  report->add_option("--in", in_dir, "Directory written by `collision`")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*collision) {
      const auto cfg = base_config(config_path, world_path);
      const auto rep = trials::run_collision_trials(cfg, runs, trials::arms_from_string(dc), seed);
      trials::write_trial_outputs(out_dir, rep);
      print_trial_summary(std::cout, rep);
      std::cout << "wrote " << out_dir << "/summary.json, runs.csv, latency_comparison.svg\n";
      return report_checks(trials::check_report(rep));
    }
    if (*measure || *gen) {
      const auto cfg = base_config(config_path, world_path);
      const auto rep = trials::run_measurement_scenario(cfg, trials::scenario_from_string(scenario), seed);
      if (*gen) {
        if (auto parent = fs::path(gen_out).parent_path(); !parent.empty()) fs::create_directories(parent);
        std::ofstream out(gen_out);
        if (!out) throw ConfigError(gen_out, "cannot write");
        write_measurements_jsonl(out, rep.records);
        std::cout << "wrote " << rep.records.size() << " records to " << gen_out << '\n';
        return 0;
      }
      print_bands(std::cout, rep);
      if (!measure_out.empty()) {
        fs::create_directories(measure_out);
        std::ofstream rec(fs::path(measure_out) / (scenario + ".jsonl"));
        write_measurements_jsonl(rec, rep.records);
        std::ofstream tables(fs::path(measure_out) / (scenario + "_tables.json"));
        tables << trials::to_json(rep).dump(2) << '\n';
      }
      return 0;
    }
    if (*report) {
      std::ifstream summary(fs::path(in_dir) / "summary.json");
      if (!summary) throw ConfigError(in_dir, "no summary.json");
      const auto j = nlohmann::json::parse(summary);
      std::ifstream csv(fs::path(in_dir) / "runs.csv");
      if (!csv) throw ConfigError(in_dir, "no runs.csv");
      const auto rows = trials::read_runs_csv(csv);
      std::cout << "run  dc   injected_ms   tcl_ms\n" << std::fixed << std::setprecision(2);
      for (const auto& r : rows) {
        std::cout << std::setw(3) << r.run << "  " << (r.dc ? "on " : "off") << std::setw(13) << r.injected_latency_ms
                  << std::setw(9) << r.tcl_ms << '\n';
      }
      std::ofstream svg(fs::path(in_dir) / "latency_comparison.svg");
      svg << trials::latency_comparison_svg(rows);
      std::cout << j.dump(2) << '\n';
      int failed = 0;
      for (const auto& c : j.value("checks", nlohmann::json::array())) {
        const bool pass = c.value("pass", false);
        std::cout << (pass ? "PASS " : "FAIL ") << c.value("name", "") << ": " << c.value("detail", "") << '\n';
        failed += pass ? 0 : 1;
      }
      return failed == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
