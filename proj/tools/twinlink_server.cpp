// twinlink-server: edge orchestration service.
//
//   twinlink-server --config cfg.json                      live WebSocket service
//   twinlink-server --config cfg.json --headless --script cmds.jsonl --seed 7

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "twinlink/config.hpp"
#include "twinlink/protocol.hpp"
#include "twinlink/server.hpp"

namespace {
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinlink-server: digital-twin edge server"};
  std::string config_path;
  bool headless = false;
  std::string script_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_s;
  std::string log_out;
  std::optional<int> port;
  app.add_option("--config", config_path, "Config file (JSON)")->required();
  app.add_flag("--headless", headless, "Run a scripted session as fast as possible and exit");
  app.add_option("--script", script_path, "Scripted command file (JSONL), headless mode");
  app.add_option("--seed", seed, "Seed (overrides config)");
  app.add_option("--duration", duration_s, "Simulated seconds (headless) or wall seconds to serve (live)");
  app.add_option("--log", log_out, "Headless flight log path (default <log_dir>/headless.jsonl)");
  app.add_option("--port", port, "Listen port (overrides config; 0 = ephemeral)");
  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = twinlink::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (port) cfg.server.port = *port;

    if (headless) {
      if (script_path.empty()) throw twinlink::ConfigError("--headless requires --script");
      const auto script = twinlink::protocol::load_script(script_path);
      const auto ticks = duration_s ? static_cast<std::int64_t>(std::llround(*duration_s / cfg.dynamics.tick_dt))
                                    : twinlink::default_duration_ticks(script, cfg.dynamics);
      const std::filesystem::path log_path =
          log_out.empty() ? std::filesystem::path(cfg.server.log_dir) / "headless.jsonl" : std::filesystem::path(log_out);
      if (log_path.has_parent_path()) std::filesystem::create_directories(log_path.parent_path());
      std::ofstream out(log_path, std::ios::trunc);
      if (!out) throw twinlink::ConfigError(log_path.string(), "cannot write flight log");
      const auto result = twinlink::run_headless(cfg, script, cfg.seed, ticks, out);
      auto summary_path = log_path;
      summary_path.replace_extension(".summary.json");
      std::ofstream(summary_path) << result.summary.dump(2) << '\n';
      std::cout << result.summary.dump() << '\n';
      return 0;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    twinlink::Server server(cfg);
    const auto bound = server.start();
    std::cout << "listening on ws://" << cfg.server.bind << ":" << bound << "/" << std::endl;
    const auto until = std::chrono::steady_clock::now() +
                       std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(duration_s.value_or(1e9)));
    while (!g_stop && std::chrono::steady_clock::now() < until) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    server.stop();
    std::cout << "stopped; logs in " << cfg.server.log_dir << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
