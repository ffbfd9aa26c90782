#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/decision_engine.hpp"
#include "twinlink/errors.hpp"
#include "twinlink/latency_model.hpp"
#include "twinlink/uav_dynamics.hpp"

// JSON wire format shared by the WebSocket channel, scripted command files
// and flight logs. Topics: "cmd" (pilot -> server), "telemetry", "decision",
// "error" (server -> pilot).
namespace twinlink::protocol {

using nlohmann::json;

inline json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

// NaN/inf are not representable in JSON; they are written as null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json state_to_json(const UavState& s) {
  return {{"pos", vec(s.position)}, {"vel", vec(s.velocity)}, {"heading", s.heading},
          {"speed", s.speed},       {"tick", s.tick}};
}

inline const char* to_string(CommandKind k) { return k == CommandKind::kStop ? "stop" : "motion"; }

inline json command_to_json(const PilotCommand& c) {
  return {{"topic", "cmd"},
          {"seq", c.seq},
          {"issued_at", c.issued_at_ms},
          {"body_velocity", vec(c.body_velocity)},
          {"yaw_rate", c.yaw_rate},
          {"kind", to_string(c.kind)}};
}

inline PilotCommand command_from_json(const json& j) {
  try {
    if (j.value("topic", std::string("cmd")) != "cmd") throw ProtocolError("unexpected topic");
    PilotCommand c;
    const auto& seq = j.at("seq");
    if (!seq.is_number_integer() || seq.get<std::int64_t>() < 0) {
      throw ProtocolError("seq must be a non-negative integer");
    }
    c.seq = seq.get<std::uint64_t>();
    c.issued_at_ms = j.value("issued_at", std::int64_t{0});
    const std::string kind = j.value("kind", std::string("motion"));
    if (kind == "stop") {
      c.kind = CommandKind::kStop;
    } else if (kind == "motion") {
      c.kind = CommandKind::kMotion;
      const auto& bv = j.at("body_velocity");
      if (!bv.is_array() || bv.size() != 3) throw ProtocolError("body_velocity must be [x, y, z]");
      c.body_velocity = {bv[0].get<double>(), bv[1].get<double>(), bv[2].get<double>()};
      c.yaw_rate = j.value("yaw_rate", 0.0);
      if (!std::isfinite(c.body_velocity.norm()) || !std::isfinite(c.yaw_rate)) {
        throw ProtocolError("non-finite setpoint");
      }
    } else {
      throw ProtocolError("unknown command kind '" + kind + "'");
    }
    return c;
  } catch (const ProtocolError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed command: ") + e.what());
  }
}

inline PilotCommand parse_command(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("command must be a JSON object");
  return command_from_json(j);
}

// Scripted command file: JSONL, one "cmd" message per line, sorted by issued_at.
inline std::vector<PilotCommand> load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open script");
  std::vector<PilotCommand> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_command(line));
    } catch (const ProtocolError& e) {
      throw ConfigError(path, "line " + std::to_string(line_no) + ": " + e.what());
    }
    if (out.size() > 1 && out.back().issued_at_ms < out[out.size() - 2].issued_at_ms) {
      throw ConfigError(path, "line " + std::to_string(line_no) + ": issued_at goes backwards");
    }
  }
  return out;
}

inline json decision_to_json(std::uint64_t seq, const Decision& d) {
  return {{"seq", seq},
          {"verdict", twinlink::to_string(d.verdict)},
          {"ld_m", number_or_null(d.ld_m)},
          {"edl_m", d.edl_m},
          {"enl_ms", d.enl_ms},
          {"enl_available", d.enl_available},
          {"reason", d.reason}};
}

inline json link_to_json(const LinkQuality& q) {
  return {{"cell_id", q.cell_id},
          {"nl_ms", q.nl_ms},
          {"throughput_mbps", q.throughput_mbps},
          {"handover", q.handover},
          {"coverage", q.coverage}};
}

inline json error_frame(const std::string& reason, std::optional<std::uint64_t> session = std::nullopt) {
  json j = {{"topic", "error"}, {"reason", reason}};
  if (session) j["session"] = *session;
  return j;
}

}  // namespace twinlink::protocol
