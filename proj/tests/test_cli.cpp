#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

struct Result {
  int code{0};
  std::string out;
};

Result run(const std::string& cmd) {
  Result r;
  FILE* p = popen((cmd + " 2>&1").c_str(), "r");
  if (!p) return {-1, ""};
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("twinlink_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kServer = TWINLINK_SERVER_BIN;
const std::string kTrials = TWINLINK_TRIALS_BIN;
const std::string kSamples = TWINLINK_SAMPLES_DIR;

}  // namespace

TEST(TrialsCli, CollisionWritesOutputsAndPassesChecks) {
  const auto d = scratch("collision");
  const auto r = run(kTrials + " collision --runs 5 --seed 3 --out " + d.string());
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("PASS dc_no_collisions"), std::string::npos) << r.out;
  for (const char* f : {"summary.json", "runs.csv", "latency_comparison.svg"}) EXPECT_TRUE(fs::exists(d / f)) << f;

  const auto rep = run(kTrials + " report --in " + d.string());
  EXPECT_EQ(rep.code, 0) << rep.out;
  EXPECT_NE(rep.out.find("injected_ms"), std::string::npos);
}

TEST(TrialsCli, GenerateAndMeasure) {
  const auto d = scratch("gen");
  const auto out = d / "db.jsonl";
  const auto g = run(kTrials + " generate-measurements --world " + kSamples + "/world.json --scenario horizontal --seed 3 --out " +
                     out.string());
  ASSERT_EQ(g.code, 0) << g.out;
  std::ifstream in(out);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    ASSERT_TRUE(j.contains("cell_id"));
    ASSERT_TRUE(j.contains("nl_ms"));
    ++n;
  }
  EXPECT_GT(n, 100u);

  const auto m = run(kTrials + " measure --scenario altitude --seed 2 --out " + d.string());
  EXPECT_EQ(m.code, 0) << m.out;
  EXPECT_TRUE(fs::exists(d / "altitude_tables.json"));
}

TEST(TrialsCli, BadArgumentsFail) {
  EXPECT_NE(run(kTrials).code, 0);
  EXPECT_NE(run(kTrials + " collision --dc sideways").code, 0);
  EXPECT_EQ(run(kTrials + " report --in /nonexistent/dir").code, 2);
}

TEST(ServerCli, HeadlessIsDeterministic) {
  const auto d = scratch("headless");
  const std::string base = kServer + " --config " + kSamples + "/config.json --headless --script " + kSamples +
                           "/approach.jsonl --seed 7 --log ";
  const auto a = run(base + (d / "a.jsonl").string());
  const auto b = run(base + (d / "b.jsonl").string());
  ASSERT_EQ(a.code, 0) << a.out;
  ASSERT_EQ(b.code, 0) << b.out;
  EXPECT_EQ(slurp(d / "a.jsonl"), slurp(d / "b.jsonl"));
  EXPECT_TRUE(fs::exists(d / "a.summary.json"));
  const auto summary = nlohmann::json::parse(slurp(d / "a.summary.json"));
  EXPECT_GT(summary.at("denials").get<int>(), 0);
  EXPECT_EQ(summary.at("physical_contact_ticks"), 0);
}

TEST(ServerCli, LiveModeStartsAndStops) {
  const auto d = scratch("live");
  const auto cfg = d / "cfg.json";
  auto j = nlohmann::json::parse(slurp(kSamples + "/config.json"));
  j["world"] = kSamples + "/world.json";
  j["weather"] = kSamples + "/weather.json";
  j["measurements"] = kSamples + "/measurements.jsonl";
  j["server"]["log_dir"] = (d / "logs").string();
  std::ofstream(cfg) << j.dump();
  const auto r = run(kServer + " --config " + cfg.string() + " --port 0 --duration 0.3");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("listening on ws://127.0.0.1:"), std::string::npos);
  EXPECT_TRUE(fs::exists(d / "logs" / "server_summary.json"));
}

TEST(ServerCli, ConfigErrorsExitNonZero) {
  const auto r = run(kServer + " --config /nonexistent.json --headless --script x");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.out.find("error"), std::string::npos);
  EXPECT_NE(run(kServer).code, 0);
}
