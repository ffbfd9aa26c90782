#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "twinlink/server.hpp"
#include "twinlink/trials.hpp"

using namespace twinlink;

namespace {

TwinConfig quiet_config() {
  TwinConfig c = trials::default_config();
  c.link.cl_mean_ms = 150.0;
  c.link.cl_std_ms = 0.0;
  c.link.nl_source = NlSource::kZero;
  return c;
}

PilotCommand fwd(std::uint64_t seq, double v, std::int64_t t_ms = 0) {
  return {seq, t_ms, {v, 0.0, 0.0}, 0.0, CommandKind::kMotion};
}

std::vector<nlohmann::json> parse_lines(const std::string& text) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

}  // namespace

TEST(Session, QuiescentTickOnlyAdvancesTime) {
  const auto cfg = quiet_config();
  Session s(1, cfg, Environment::from_config(cfg, 1), 1);
  const UavState before = s.twin();
  const auto f = s.run_tick();
  EXPECT_EQ(f.tick, 0);
  EXPECT_EQ(s.twin().position, before.position);
  EXPECT_EQ(s.twin().velocity, before.velocity);
  EXPECT_EQ(s.physical().position, before.position);
  EXPECT_EQ(s.twin().tick, 1);
  EXPECT_TRUE(f.decisions.empty());
}

TEST(Session, TwinRespondsImmediatelyPhysicalAfterLinkDelay) {
  const auto cfg = quiet_config();
  Session s(1, cfg, Environment::from_config(cfg, 1), 1);
  s.submit(fwd(1, 2.0));
  const auto f0 = s.run_tick();
  ASSERT_EQ(f0.decisions.size(), 1u);
  EXPECT_EQ(f0.decisions[0].decision.verdict, Verdict::kApproved);
  EXPECT_EQ(f0.decisions[0].deliver_at_tick, 15);
  EXPECT_GT(s.twin().velocity.x, 0.0);
  EXPECT_EQ(s.physical().velocity.x, 0.0);
  std::int64_t first_phys_move = -1;
  for (int i = 1; i < 40 && first_phys_move < 0; ++i) {
    const auto f = s.run_tick();
    if (s.physical().velocity.x > 0.0) first_phys_move = f.tick;
  }
  EXPECT_EQ(first_phys_move, 15);
}

TEST(Session, ForwardCommandAtTheWallIsDeniedForBoth) {
  auto cfg = quiet_config();
  cfg.server.start_position = {29.5, 0.0, 10.0};  // 0.5 m from the wall face
  Session s(1, cfg, Environment::from_config(cfg, 1), 1);
  s.submit(fwd(1, 2.0));
  const auto f = s.run_tick();
  ASSERT_EQ(f.decisions.size(), 1u);
  EXPECT_EQ(f.decisions[0].decision.verdict, Verdict::kDeniedStop);
  EXPECT_NEAR(f.decisions[0].decision.ld_m, 0.5, 1e-9);
  EXPECT_EQ(f.decisions[0].dispatched.kind, CommandKind::kStop);
  EXPECT_EQ(s.twin_active().kind, CommandKind::kStop);
  for (int i = 0; i < 20; ++i) s.run_tick();
  EXPECT_EQ(s.physical_active().kind, CommandKind::kStop);
  EXPECT_EQ(s.physical_active().seq, 1u);
}

TEST(Session, TwinLeadsPhysicalForEveryApprovedCommand) {
  TwinConfig cfg = trials::default_config();
  cfg.server.start_position = {-200.0, 0.0, 10.0};
  Session s(1, cfg, Environment::from_config(cfg, 4), 4, std::nullopt, FlightLog(nullptr, true));
  std::uint64_t seq = 0;
  for (int t = 0; t < 1000; ++t) {
    if (t % 5 == 0) s.submit(fwd(++seq, (t / 100) % 2 == 0 ? 3.0 : 1.0, t * 10));
    s.run_tick();
  }
  std::map<std::uint64_t, std::int64_t> twin_at;
  std::map<std::uint64_t, std::int64_t> phys_at;
  for (const auto& row : s.log().kept()) {
    const auto tick = row.at("tick").get<std::int64_t>();
    twin_at.try_emplace(row.at("twin_cmd_seq").get<std::uint64_t>(), tick);
    phys_at.try_emplace(row.at("physical_cmd_seq").get<std::uint64_t>(), tick);
  }
  ASSERT_GT(phys_at.size(), 100u);
  for (const auto& [k, tick] : phys_at) {
    if (k == 0) continue;
    ASSERT_TRUE(twin_at.count(k));
    EXPECT_LE(twin_at[k], tick) << "seq " << k;
  }
}

TEST(Session, ZeroLatencyKeepsTwinAndPhysicalIdentical) {
  TwinConfig cfg = trials::default_config();
  cfg.link.cl_mean_ms = 0.0;
  cfg.link.cl_std_ms = 0.0;
  cfg.link.nl_source = NlSource::kZero;
  cfg.weather = nlohmann::json::parse(R"([{"wind":[0.5,0.2,0],"gust_std":0.3}])");
  Session s(1, cfg, Environment::from_config(cfg, 2), 2);
  std::uint64_t seq = 0;
  for (int t = 0; t < 600; ++t) {
    if (t % 5 == 0) s.submit({++seq, t * 10, {2.0, 0.5, 0.1}, 0.2, CommandKind::kMotion});
    s.run_tick();
    ASSERT_EQ(s.twin().position, s.physical().position) << t;
  }
}

TEST(Session, MalformedAndInvalidCommandsAreRejectedAndLogged) {
  const auto cfg = quiet_config();
  std::ostringstream out;
  Session s(1, cfg, Environment::from_config(cfg, 1), 1, std::nullopt, FlightLog(&out));
  EXPECT_TRUE(s.submit_text("{not json"));
  EXPECT_TRUE(s.submit_text(R"({"seq":1,"kind":"motion"})"));
  EXPECT_TRUE(s.submit_text(R"({"seq":1,"kind":"motion","body_velocity":[9,0,0]})"));
  EXPECT_FALSE(s.submit_text(R"({"seq":2,"kind":"motion","body_velocity":[1,0,0]})"));
  EXPECT_TRUE(s.submit_text(R"({"seq":2,"kind":"stop"})"));
  EXPECT_THROW(s.submit(fwd(1, 1.0)), ProtocolError);
  s.run_tick();
  const auto rows = parse_lines(out.str());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].at("errors").size(), 4u);
  EXPECT_EQ(rows[0].at("decisions").size(), 1u);
}

TEST(Session, EveryTickLogsExactlyOneRow) {
  const auto cfg = quiet_config();
  std::ostringstream out;
  Session s(1, cfg, Environment::from_config(cfg, 1), 1, std::nullopt, FlightLog(&out));
  for (int i = 0; i < 250; ++i) {
    if (i % 5 == 0) s.submit(fwd(static_cast<std::uint64_t>(i + 1), 1.0));
    s.run_tick();
  }
  const auto rows = parse_lines(out.str());
  ASSERT_EQ(rows.size(), 250u);
  std::size_t decisions = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].at("tick"), static_cast<std::int64_t>(i));
    decisions += rows[i].at("decisions").size();
    for (const char* key : {"twin", "physical", "ld_m", "edl_m", "cell_id", "nl_ms", "throughput_mbps"}) {
      ASSERT_TRUE(rows[i].contains(key)) << key;
    }
  }
  EXPECT_EQ(decisions, 50u);
  EXPECT_EQ(s.summary().at("commands"), 50);
}

TEST(FlightLogTest, RejectsNonIncreasingTicks) {
  FlightLog log;
  log.append({{"tick", 0}});
  EXPECT_THROW(log.append({{"tick", 0}}), std::logic_error);
}

TEST(Headless, TenSecondHoverGivesOneThousandRows) {
  const auto cfg = quiet_config();
  std::vector<PilotCommand> script;
  for (int i = 0; i < 200; ++i) script.push_back({static_cast<std::uint64_t>(i + 1), i * 50, {}, 0.0, CommandKind::kMotion});
  std::ostringstream out;
  const auto r = run_headless(cfg, script, 1, 1000, out);
  EXPECT_EQ(parse_lines(out.str()).size(), 1000u);
  EXPECT_EQ(r.summary.at("log_rows"), 1000);
  EXPECT_EQ(r.summary.at("commands"), 200);
  EXPECT_EQ(default_duration_ticks(script, cfg.dynamics), 1095);
}

TEST(Headless, ByteIdenticalForSameSeed) {
  const auto cfg = trials::default_config();
  std::vector<PilotCommand> script;
  for (int i = 0; i < 100; ++i) script.push_back(fwd(static_cast<std::uint64_t>(i + 1), 3.0, i * 50));
  std::ostringstream a;
  std::ostringstream b;
  std::ostringstream c;
  run_headless(cfg, script, 7, 700, a);
  run_headless(cfg, script, 7, 700, b);
  run_headless(cfg, script, 8, 700, c);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_NE(a.str(), c.str());
}

TEST(Config, LoadsSampleConfig) {
  const auto cfg = load_config(std::string(TWINLINK_SAMPLES_DIR) + "/config.json");
  EXPECT_EQ(cfg.world.base_stations.size(), 6u);
  EXPECT_FALSE(cfg.measurements->empty());
  EXPECT_EQ(cfg.decision.th_m, 1.0);
  EXPECT_EQ(cfg.decision.cl_ms, 146.0);
}

TEST(Config, ErrorsNameTheProblem) {
  const auto dir = std::filesystem::temp_directory_path() / "twinlink_cfg";
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& body) {
    std::ofstream(dir / "c.json") << body;
    return (dir / "c.json").string();
  };
  EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
  EXPECT_THROW(load_config(write("{")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"dynamics":{"tau":0.01}})")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"decision":{"th_m":0}})")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"link":{"nl_source":"carrier-pigeon"}})")), ConfigError);
  EXPECT_THROW(load_config(write(R"({"world":"nope.json"})")), ConfigError);
  try {
    load_config(write(R"({"dynamics":{"tau":-1}})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tau"), std::string::npos);
  }
  EXPECT_NO_THROW(load_config(write("{}")));
}

TEST(Protocol, CommandRoundTripAndScript) {
  const PilotCommand c{7, 350, {1.5, -0.5, 0.25}, 0.1, CommandKind::kMotion};
  const auto back = protocol::parse_command(protocol::command_to_json(c).dump());
  EXPECT_EQ(back.seq, 7u);
  EXPECT_EQ(back.issued_at_ms, 350);
  EXPECT_EQ(back.body_velocity, c.body_velocity);
  EXPECT_THROW(protocol::parse_command(R"({"seq":-1,"body_velocity":[0,0,0]})"), ProtocolError);
  EXPECT_THROW(protocol::parse_command(R"({"seq":1,"kind":"warp"})"), ProtocolError);
  EXPECT_THROW(protocol::parse_command(R"([1,2])"), ProtocolError);
  const auto script = protocol::load_script(std::string(TWINLINK_SAMPLES_DIR) + "/approach.jsonl");
  EXPECT_GT(script.size(), 10u);
}
