#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "twinlink/geo_world.hpp"
#include "twinlink/vec3.hpp"

namespace twinlink {

struct UavState {
  Vec3 position;
  Vec3 velocity;
  double heading{0.0};  // yaw, rad, 0 = +x (east)
  double speed{0.0};    // |velocity|
  std::int64_t tick{0};
};

enum class CommandKind { kMotion, kStop };

struct PilotCommand {
  std::uint64_t seq{0};
  std::int64_t issued_at_ms{0};
  Vec3 body_velocity;  // x = forward, y = left, z = up
  double yaw_rate{0.0};
  CommandKind kind{CommandKind::kMotion};

  static PilotCommand stop(std::uint64_t seq, std::int64_t issued_at_ms) {
    return {seq, issued_at_ms, {}, 0.0, CommandKind::kStop};
  }
};

struct DynamicsConfig {
  double tau{0.05};      // first-order velocity response, s
  double v_max{6.0};     // m/s
  double tick_dt{0.01};  // s
  double wind_gain{1.0};

  void validate() const {
    if (!(tau > 0.0)) throw std::invalid_argument("dynamics: tau must be > 0");
    if (!(tick_dt > 0.0)) throw std::invalid_argument("dynamics: tick_dt must be > 0");
    if (tick_dt > tau / 3.0 + 1e-12) throw std::invalid_argument("dynamics: tick_dt must be <= tau/3");
    if (!(v_max > 0.0)) throw std::invalid_argument("dynamics: v_max must be > 0");
  }

  [[nodiscard]] double tick_ms() const { return tick_dt * 1000.0; }
};

// Signed body-x setpoint; > 0 means the command drives the UAV forward.
inline double forward_component(const PilotCommand& cmd) {
  return cmd.kind == CommandKind::kStop ? 0.0 : cmd.body_velocity.x;
}

// Body-frame setpoint rotated into ENU by yaw.
inline Vec3 world_setpoint(const PilotCommand& cmd, double heading) {
  if (cmd.kind == CommandKind::kStop) return {};
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const Vec3& b = cmd.body_velocity;
  return {c * b.x - s * b.y, s * b.x + c * b.y, b.z};
}

// One fixed tick of point-mass flight. Velocity relaxes toward the world
// setpoint plus wind bias with time constant tau; position integrates the
// updated velocity (semi-implicit Euler). Position is clamped to `bounds`
// when given.
inline UavState step(const UavState& state, const PilotCommand& active, const WindSample& wind,
                     const DynamicsConfig& cfg, const std::optional<Aabb>& bounds = std::nullopt) {
  const double dt = cfg.tick_dt;
  const Vec3 target = world_setpoint(active, state.heading) + cfg.wind_gain * wind.effective();

  UavState next = state;
  next.velocity = state.velocity + (target - state.velocity) * (dt / cfg.tau);
  next.position = state.position + next.velocity * dt;
  if (active.kind != CommandKind::kStop) next.heading = state.heading + active.yaw_rate * dt;
  if (bounds) {
    const Vec3 clamped = bounds->clamp(next.position);
    for (int axis = 0; axis < 3; ++axis) {
      if (clamped[axis] != next.position[axis]) {
        // Pinned against the boundary: no velocity into it.
        (axis == 0 ? next.velocity.x : axis == 1 ? next.velocity.y : next.velocity.z) = 0.0;
      }
    }
    next.position = clamped;
  }
  next.speed = next.velocity.norm();
  next.tick = state.tick + 1;
  return next;
}

}  // namespace twinlink
