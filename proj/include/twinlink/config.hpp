#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "twinlink/decision_engine.hpp"
#include "twinlink/errors.hpp"
#include "twinlink/geo_world.hpp"
#include "twinlink/latency_model.hpp"
#include "twinlink/link_sim.hpp"
#include "twinlink/uav_dynamics.hpp"

namespace twinlink {

struct ServerSettings {
  std::string bind{"127.0.0.1"};
  int port{8765};
  std::string log_dir{"logs"};
  double telemetry_hz{25.0};  // live clients are decimated to at most this rate
  Vec3 start_position{0.0, 0.0, 10.0};
  double start_heading{0.0};
  double lidar_range_m{kDefaultLidarRangeM};
};

// Everything a session needs: static data plus every tunable section.
struct TwinConfig {
  WorldModel world;
  nlohmann::json weather = nlohmann::json::array();  // records; empty = calm
  std::shared_ptr<const MeasurementDb> measurements = std::make_shared<MeasurementDb>();
  DynamicsConfig dynamics;
  LinkConfig link;
  DecisionConfig decision;
  RadioConfig radio;
  ServerSettings server;
  std::uint64_t seed{0};

  void validate() const {
    world.validate();
    dynamics.validate();
    link.validate();
    decision.validate();
    if (!(server.lidar_range_m > 0.0)) throw std::invalid_argument("server: lidar_range_m must be > 0");
    if (!(server.telemetry_hz > 0.0)) throw std::invalid_argument("server: telemetry_hz must be > 0");
  }
};

namespace detail {

inline std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).string();
}

}  // namespace detail

// Parses a config document. String values for world/weather/measurements
// are file paths relative to `base_dir`; objects/arrays are taken inline.
inline TwinConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  TwinConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});

    if (j.contains("world")) {
      const auto& w = j.at("world");
      c.world = w.is_string() ? load_world(detail::resolve(base_dir, w.get<std::string>())) : world_from_json(w);
    }
    if (j.contains("weather")) {
      const auto& w = j.at("weather");
      if (w.is_string()) {
        c.weather = detail::read_json_file(detail::resolve(base_dir, w.get<std::string>()));
      } else {
        c.weather = w;
      }
      WeatherProvider::from_json(c.weather, 0);  // validate early
    }

    const auto& r = j.value("radio", nlohmann::json::object());
    c.radio.base_nl_ms = r.value("base_nl_ms", c.radio.base_nl_ms);
    c.radio.handover_penalty_ms = r.value("handover_penalty_ms", c.radio.handover_penalty_ms);
    c.radio.handover_window_ms = r.value("handover_window_ms", c.radio.handover_window_ms);
    c.radio.nl_noise_std_ms = r.value("nl_noise_std_ms", c.radio.nl_noise_std_ms);
    c.radio.altitude_threshold_m = r.value("altitude_threshold_m", c.radio.altitude_threshold_m);
    c.radio.throughput_low_alt_mbps = r.value("throughput_low_alt_mbps", c.radio.throughput_low_alt_mbps);
    c.radio.throughput_high_alt_mbps = r.value("throughput_high_alt_mbps", c.radio.throughput_high_alt_mbps);
    c.radio.throughput_spread = r.value("throughput_spread", c.radio.throughput_spread);
    c.radio.gain_jitter_base_m = r.value("gain_jitter_base_m", c.radio.gain_jitter_base_m);
    c.radio.gain_jitter_m_per_m = r.value("gain_jitter_m_per_m", c.radio.gain_jitter_m_per_m);
    c.radio.fallback_nl_ms = r.value("fallback_nl_ms", c.radio.fallback_nl_ms);

    if (j.contains("measurements")) {
      const auto& m = j.at("measurements");
      if (m.is_string()) {
        c.measurements = std::make_shared<MeasurementDb>(MeasurementDb::load_jsonl(
            detail::resolve(base_dir, m.get<std::string>()), c.world.origin, c.radio.fallback_nl_ms));
      } else {
        std::vector<LatencyRecord> recs;
        for (const auto& rec : m) recs.push_back(record_from_json(rec, c.world.origin));
        c.measurements = std::make_shared<MeasurementDb>(std::move(recs), c.radio.fallback_nl_ms);
      }
    }

    const auto& d = j.value("dynamics", nlohmann::json::object());
    c.dynamics.tau = d.value("tau", c.dynamics.tau);
    c.dynamics.v_max = d.value("v_max", c.dynamics.v_max);
    c.dynamics.tick_dt = d.value("tick_dt", c.dynamics.tick_dt);
    c.dynamics.wind_gain = d.value("wind_gain", c.dynamics.wind_gain);

    const auto& l = j.value("link", nlohmann::json::object());
    c.link.cl_mean_ms = l.value("cl_mean_ms", c.link.cl_mean_ms);
    c.link.cl_std_ms = l.value("cl_std_ms", c.link.cl_std_ms);
    c.link.nl_source = nl_source_from_string(l.value("nl_source", std::string(to_string(c.link.nl_source))));
    c.link.nl_const_ms = l.value("nl_const_ms", c.link.nl_const_ms);

    const auto& dc = j.value("decision", nlohmann::json::object());
    c.decision.th_m = dc.value("th_m", c.decision.th_m);
    c.decision.cl_ms = dc.value("cl_ms", c.decision.cl_ms);
    c.decision.dc_enabled = dc.value("dc_enabled", c.decision.dc_enabled);

    const auto& s = j.value("server", nlohmann::json::object());
    c.server.bind = s.value("bind", c.server.bind);
    c.server.port = s.value("port", c.server.port);
    c.server.log_dir = s.value("log_dir", c.server.log_dir);
    c.server.telemetry_hz = s.value("telemetry_hz", c.server.telemetry_hz);
    if (s.contains("start_position")) c.server.start_position = detail::vec_from_json(s.at("start_position"));
    c.server.start_heading = s.value("start_heading", c.server.start_heading);
    c.server.lidar_range_m = s.value("lidar_range_m", c.server.lidar_range_m);

    c.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline TwinConfig load_config(const std::string& path) {
  try {
    const auto j = detail::read_json_file(path);
    return config_from_json(j, std::filesystem::path(path).parent_path());
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path, msg);
  }
}

}  // namespace twinlink
