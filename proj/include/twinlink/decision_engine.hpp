#pragma once

#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "twinlink/latency_model.hpp"
#include "twinlink/uav_dynamics.hpp"

namespace twinlink {

struct DecisionConfig {
  double th_m{1.0};     // stop threshold
  double cl_ms{146.0};  // mean command latency
  bool dc_enabled{true};

  void validate() const {
    if (!(th_m > 0.0)) throw std::invalid_argument("decision: th_m must be > 0");
    if (!(cl_ms >= 0.0)) throw std::invalid_argument("decision: cl_ms must be >= 0");
  }
};

enum class Verdict { kApproved, kDeniedStop };

inline const char* to_string(Verdict v) { return v == Verdict::kApproved ? "approved" : "denied_stop"; }

struct Decision {
  Verdict verdict{Verdict::kApproved};
  double edl_m{0.0};
  double ld_m{std::numeric_limits<double>::infinity()};  // +inf = LiDAR reported no hit
  double enl_ms{0.0};
  bool enl_available{false};
  std::string reason;
};

// Error distance related to latency: how far the UAV travels at `us` during
// the command latency plus the estimated network latency (ms -> s).
inline double compute_edl(double cl_ms, double enl_ms, double us) {
  if (!(cl_ms >= 0.0) || !(enl_ms >= 0.0) || !(us >= 0.0)) {
    throw std::domain_error("compute_edl: inputs must be non-negative");
  }
  return (cl_ms + enl_ms) / 1000.0 * us;
}

// Maps an optional LiDAR return onto a distance; no hit never trips the gate.
inline double lidar_distance_or_inf(const std::optional<double>& hit) {
  return hit ? *hit : std::numeric_limits<double>::infinity();
}

// Approves the command unless it drives forward into the latency-widened
// stop zone, i.e. LD <= TH + EDL. With compensation off the gate is the bare
// LD <= TH.
inline Decision decide(const PilotCommand& cmd, const UavState& state, double ld_m,
                       const MeasurementDb& db, const DecisionConfig& cfg,
                       const std::optional<std::string>& current_cell = std::nullopt) {
  Decision d;
  d.ld_m = ld_m;
  if (cfg.dc_enabled) {
    const auto enl = get_enl(db, state.position, current_cell);
    d.enl_ms = enl.nl_ms;
    d.enl_available = enl.available;
    d.edl_m = compute_edl(cfg.cl_ms, d.enl_ms, state.speed);
  }
  const bool forward = forward_component(cmd) > 0.0;
  const bool inside_gate = ld_m <= cfg.th_m + d.edl_m;
  if (forward && inside_gate) {
    d.verdict = Verdict::kDeniedStop;
    d.reason = "forward command inside stop zone";
  } else {
    d.verdict = Verdict::kApproved;
    d.reason = forward ? "clear ahead" : "not a forward command";
  }
  return d;
}

}  // namespace twinlink
