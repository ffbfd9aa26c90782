#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/config.hpp"
#include "twinlink/decision_engine.hpp"
#include "twinlink/geo_world.hpp"
#include "twinlink/latency_model.hpp"
#include "twinlink/link_sim.hpp"
#include "twinlink/protocol.hpp"
#include "twinlink/uav_dynamics.hpp"

namespace twinlink {

// Append-only per-tick JSONL log. Rows must arrive with strictly increasing
// tick; optionally keeps rows in memory for inspection.
class FlightLog {
 public:
  explicit FlightLog(std::ostream* sink = nullptr, bool retain = false) : sink_(sink), retain_(retain) {}

  void append(const nlohmann::json& row) {
    const auto tick = row.at("tick").get<std::int64_t>();
    if (last_tick_ && tick <= *last_tick_) {
      throw std::logic_error("FlightLog: ticks must be strictly increasing");
    }
    last_tick_ = tick;
    ++rows_;
    if (sink_) *sink_ << row.dump() << '\n';
    if (retain_) kept_.push_back(row);
  }

  void flush() {
    if (sink_) sink_->flush();
  }

  [[nodiscard]] std::size_t rows() const { return rows_; }
  [[nodiscard]] const std::vector<nlohmann::json>& kept() const { return kept_; }

 private:
  std::ostream* sink_;
  bool retain_;
  std::optional<std::int64_t> last_tick_;
  std::size_t rows_{0};
  std::vector<nlohmann::json> kept_;
};

// Shared read-only inputs for sessions.
struct Environment {
  std::shared_ptr<const WorldModel> world;
  std::shared_ptr<const WeatherProvider> weather;
  std::shared_ptr<const MeasurementDb> measurements;

  static Environment from_config(const TwinConfig& cfg, std::uint64_t seed) {
    return {std::make_shared<WorldModel>(cfg.world),
            std::make_shared<WeatherProvider>(WeatherProvider::from_json(cfg.weather, seed)),
            cfg.measurements ? cfg.measurements : std::make_shared<MeasurementDb>()};
  }
};

// One command's pass through the decision engine.
struct DecisionEvent {
  PilotCommand command;     // as received from the pilot
  PilotCommand dispatched;  // what went to both UAVs (stop when denied)
  Decision decision;
  std::int64_t deliver_at_tick{0};
  double sampled_latency_ms{0.0};
  double realized_latency_ms{0.0};  // after tick rounding and FIFO clamping
};

struct TelemetryFrame {
  std::uint64_t session{0};
  std::int64_t tick{0};
  std::int64_t t_ms{0};
  UavState twin;
  UavState physical;
  std::optional<UavState> physical_observed;  // last state seen at the edge over the return link
  double ld_m{std::numeric_limits<double>::infinity()};
  double edl_m{0.0};
  double enl_ms{0.0};
  double th_m{0.0};
  LinkQuality link;
  WindSample wind;
  std::vector<DecisionEvent> decisions;  // made this tick
  std::optional<DecisionEvent> latest_decision;
  std::vector<std::uint64_t> delivered;  // seqs applied to the physical UAV this tick
  std::vector<std::string> errors;       // rejected pilot messages
  bool twin_contact{false};
  bool physical_contact{false};
  std::uint64_t video_frame_seq{0};
  double video_bitrate_mbps{0.0};
};

inline nlohmann::json decision_event_to_json(const DecisionEvent& e) {
  auto j = protocol::decision_to_json(e.command.seq, e.decision);
  j["kind"] = protocol::to_string(e.command.kind);
  j["dispatched_kind"] = protocol::to_string(e.dispatched.kind);
  j["deliver_at_tick"] = e.deliver_at_tick;
  j["sampled_latency_ms"] = e.sampled_latency_ms;
  j["realized_latency_ms"] = e.realized_latency_ms;
  return j;
}

inline nlohmann::json telemetry_to_json(const TelemetryFrame& f) {
  using protocol::number_or_null;
  nlohmann::json j = {{"topic", "telemetry"},
                      {"session", f.session},
                      {"tick", f.tick},
                      {"t_ms", f.t_ms},
                      {"twin", protocol::state_to_json(f.twin)},
                      {"physical", protocol::state_to_json(f.physical)},
                      {"ld_m", number_or_null(f.ld_m)},
                      {"edl_m", f.edl_m},
                      {"gate_m", f.th_m + f.edl_m},
                      {"th_m", f.th_m},
                      {"enl_ms", f.enl_ms},
                      {"link", protocol::link_to_json(f.link)},
                      {"video", {{"frame_seq", f.video_frame_seq}, {"bitrate_mbps", f.video_bitrate_mbps}}}};
  j["physical_observed"] = f.physical_observed ? protocol::state_to_json(*f.physical_observed) : nlohmann::json();
  j["latest_decision"] = f.latest_decision ? decision_event_to_json(*f.latest_decision) : nlohmann::json();
  return j;
}

inline constexpr double kVideoFps = 30.0;
inline constexpr double kVideoMaxBitrateMbps = 25.0;

// Nominal stream bitrate: a fixed fraction of link throughput, capped.
inline double video_bitrate_for(double throughput_mbps) {
  return std::min(kVideoMaxBitrateMbps, 0.8 * throughput_mbps);
}

// Initial conditions for a session. Both UAVs start from the same state.
struct SessionStart {
  UavState state;
  PilotCommand active;  // command held by both UAVs before any pilot input
};

// Twin + physical stand-in pair driven on a fixed tick. Pilot commands are
// queued with submit() and processed on the next run_tick(). All mutation
// happens on the caller's thread.
class Session {
 public:
  Session(std::uint64_t id, const TwinConfig& cfg, Environment env, std::uint64_t seed,
          std::optional<SessionStart> start = std::nullopt, FlightLog log = FlightLog{})
      : id_(id),
        cfg_(cfg),
        env_(std::move(env)),
        link_([&] {
          LinkConfig lc = cfg.link;
          lc.seed = seed;
          return CommandLink(lc, cfg.dynamics.tick_ms(), env_.measurements, Stream::kCommandLink);
        }()),
        telemetry_sampler_(
            [&] {
              LinkConfig lc = cfg.link;
              lc.seed = seed;
              return lc;
            }(),
            env_.measurements, make_rng(seed, Stream::kTelemetryLink)),
        telemetry_line_(cfg.dynamics.tick_ms()),
        cells_(cfg.radio, seed),
        log_(std::move(log)) {
    cfg_.validate();
    if (start) {
      twin_ = start->state;
      twin_active_ = start->active;
    } else {
      twin_.position = cfg.server.start_position;
      twin_.heading = cfg.server.start_heading;
    }
    twin_.speed = twin_.velocity.norm();
    twin_.tick = 0;
    physical_ = twin_;
    physical_active_ = twin_active_;
    link_quality_ = cells_.attach(*env_.world, physical_.position, 0);
  }

  // Validates and queues a pilot command; throws ProtocolError when rejected.
  void submit(const PilotCommand& cmd) {
    if (last_seq_ && cmd.seq <= *last_seq_) {
      throw ProtocolError("seq " + std::to_string(cmd.seq) + " not greater than " + std::to_string(*last_seq_));
    }
    if (cmd.kind == CommandKind::kMotion && cmd.body_velocity.norm() > cfg_.dynamics.v_max + 1e-9) {
      throw ProtocolError("setpoint exceeds v_max");
    }
    last_seq_ = cmd.seq;
    inbox_.push_back(cmd);
  }

  // Parses a raw wire message; on failure the error is recorded for the next
  // log row and returned.
  std::optional<std::string> submit_text(const std::string& text) {
    try {
      submit(protocol::parse_command(text));
      return std::nullopt;
    } catch (const ProtocolError& e) {
      pending_errors_.emplace_back(e.what());
      return std::string(e.what());
    }
  }

  TelemetryFrame run_tick() {
    const std::int64_t now = tick_;
    const double tick_ms = cfg_.dynamics.tick_ms();
    const auto now_ms = static_cast<std::int64_t>(std::llround(static_cast<double>(now) * tick_ms));
    const auto& world = *env_.world;
    const std::optional<std::string> cell =
        link_quality_.coverage ? std::optional<std::string>(link_quality_.cell_id) : std::nullopt;

    TelemetryFrame f;
    f.session = id_;
    f.tick = now;
    f.t_ms = now_ms;
    f.th_m = cfg_.decision.th_m;
    f.errors = std::move(pending_errors_);
    pending_errors_.clear();

    // (1)+(2) ingest and decide.
    while (!inbox_.empty()) {
      PilotCommand cmd = inbox_.front();
      inbox_.pop_front();
      const double ld = twin_lidar();
      DecisionEvent ev;
      ev.command = cmd;
      ev.decision = decide(cmd, twin_, ld, *env_.measurements, cfg_.decision, cell);
      ev.dispatched = ev.decision.verdict == Verdict::kApproved ? cmd : PilotCommand::stop(cmd.seq, cmd.issued_at_ms);
      twin_active_ = ev.dispatched;
      const auto in_flight = link_.enqueue(ev.dispatched, physical_.position, now, cell);
      ev.deliver_at_tick = in_flight.deliver_at_tick;
      ev.sampled_latency_ms = in_flight.sampled_latency_ms;
      ev.realized_latency_ms = static_cast<double>(in_flight.deliver_at_tick - now) * tick_ms;
      f.decisions.push_back(ev);
      latest_decision_ = ev;
      ++commands_;
      if (ev.decision.verdict == Verdict::kDeniedStop) ++denials_;
      latency_sum_ += ev.realized_latency_ms;
      latency_sum2_ += ev.realized_latency_ms * ev.realized_latency_ms;
    }

    // (3) physical side receives whatever the link delivers now.
    for (auto& cmd : link_.drain(now)) {
      f.delivered.push_back(cmd.seq);
      physical_active_ = cmd;
    }

    // (4) integrate both airframes.
    const WindSample twin_wind = env_.weather->wind_at(twin_.position, now);
    const WindSample phys_wind = env_.weather->wind_at(physical_.position, now);
    twin_ = step(twin_, twin_active_, twin_wind, cfg_.dynamics, world.bounds);
    physical_ = step(physical_, physical_active_, phys_wind, cfg_.dynamics, world.bounds);

    // (5) serving cell follows the physical UAV.
    link_quality_ = cells_.attach(world, physical_.position, now_ms);
    if (link_quality_.handover) ++handovers_;

    // Return path: physical state reaches the edge after its own latency.
    telemetry_line_.push(physical_, telemetry_sampler_.sample_ms(physical_.position, cell), now);
    for (auto& s : telemetry_line_.drain(now)) physical_observed_ = s.item;

    f.twin = twin_;
    f.physical = physical_;
    f.physical_observed = physical_observed_;
    f.ld_m = twin_lidar();
    if (cfg_.decision.dc_enabled) {
      const auto enl = get_enl(*env_.measurements, twin_.position, cell);
      f.enl_ms = enl.nl_ms;
      f.edl_m = compute_edl(cfg_.decision.cl_ms, enl.nl_ms, twin_.speed);
    }
    f.link = link_quality_;
    f.wind = twin_wind;
    f.latest_decision = latest_decision_;
    f.twin_contact = world.inside_obstacle(twin_.position);
    f.physical_contact = world.inside_obstacle(physical_.position);
    twin_contacts_ += f.twin_contact ? 1 : 0;
    physical_contacts_ += f.physical_contact ? 1 : 0;
    f.video_frame_seq = static_cast<std::uint64_t>(static_cast<double>(now_ms) * kVideoFps / 1000.0);
    f.video_bitrate_mbps = video_bitrate_for(link_quality_.throughput_mbps);

    // (6) log.
    log_.append(log_row(f, phys_wind));
    ++tick_;
    return f;
  }

  [[nodiscard]] std::uint64_t id() const { return id_; }
  [[nodiscard]] std::int64_t tick() const { return tick_; }
  [[nodiscard]] const UavState& twin() const { return twin_; }
  [[nodiscard]] const UavState& physical() const { return physical_; }
  [[nodiscard]] const PilotCommand& twin_active() const { return twin_active_; }
  [[nodiscard]] const PilotCommand& physical_active() const { return physical_active_; }
  [[nodiscard]] const LinkQuality& link_quality() const { return link_quality_; }
  [[nodiscard]] std::size_t pending_on_link() const { return link_.pending(); }
  [[nodiscard]] FlightLog& log() { return log_; }
  [[nodiscard]] const TwinConfig& config() const { return cfg_; }

  [[nodiscard]] double twin_lidar() const {
    return lidar_distance_or_inf(
        lidar_range(*env_.world, twin_.position, forward_axis(twin_.heading), cfg_.server.lidar_range_m));
  }

  [[nodiscard]] nlohmann::json summary() const {
    const double n = static_cast<double>(commands_);
    const double mean = commands_ ? latency_sum_ / n : 0.0;
    const double var = commands_ > 1 ? std::max(0.0, (latency_sum2_ - n * mean * mean) / (n - 1.0)) : 0.0;
    return {{"session", id_},
            {"ticks", tick_},
            {"log_rows", log_.rows()},
            {"commands", commands_},
            {"denials", denials_},
            {"latency_mean_ms", mean},
            {"latency_std_ms", std::sqrt(var)},
            {"handovers", handovers_},
            {"twin_contact_ticks", twin_contacts_},
            {"physical_contact_ticks", physical_contacts_}};
  }

 private:
  nlohmann::json log_row(const TelemetryFrame& f, const WindSample& phys_wind) const {
    using protocol::number_or_null;
    nlohmann::json decisions = nlohmann::json::array();
    for (const auto& d : f.decisions) decisions.push_back(decision_event_to_json(d));
    return {{"tick", f.tick},
            {"t_ms", f.t_ms},
            {"twin", protocol::state_to_json(f.twin)},
            {"physical", protocol::state_to_json(f.physical)},
            {"twin_cmd_seq", twin_active_.seq},
            {"physical_cmd_seq", physical_active_.seq},
            {"decisions", decisions},
            {"delivered", f.delivered},
            {"errors", f.errors},
            {"ld_m", number_or_null(f.ld_m)},
            {"edl_m", f.edl_m},
            {"enl_ms", f.enl_ms},
            {"cell_id", f.link.cell_id},
            {"handover", f.link.handover},
            {"nl_ms", f.link.nl_ms},
            {"throughput_mbps", f.link.throughput_mbps},
            {"wind", protocol::vec(f.wind.effective())},
            {"wind_physical", protocol::vec(phys_wind.effective())},
            {"twin_contact", f.twin_contact},
            {"physical_contact", f.physical_contact}};
  }

  std::uint64_t id_;
  TwinConfig cfg_;
  Environment env_;
  CommandLink link_;
  LatencySampler telemetry_sampler_;
  DelayLine<UavState> telemetry_line_;
  CellTracker cells_;
  FlightLog log_;

  std::int64_t tick_{0};
  UavState twin_;
  UavState physical_;
  PilotCommand twin_active_;
  PilotCommand physical_active_;
  std::optional<UavState> physical_observed_;
  LinkQuality link_quality_;
  std::deque<PilotCommand> inbox_;
  std::vector<std::string> pending_errors_;
  std::optional<std::uint64_t> last_seq_;
  std::optional<DecisionEvent> latest_decision_;

  std::uint64_t commands_{0};
  std::uint64_t denials_{0};
  std::uint64_t handovers_{0};
  std::uint64_t twin_contacts_{0};
  std::uint64_t physical_contacts_{0};
  double latency_sum_{0.0};
  double latency_sum2_{0.0};
};

}  // namespace twinlink
