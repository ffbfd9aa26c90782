#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/errors.hpp"
#include "twinlink/rng.hpp"
#include "twinlink/vec3.hpp"

namespace twinlink {

// ---------------------------------------------------------------------------
// Geodetic <-> local ENU
// ---------------------------------------------------------------------------

struct Geodetic {
  double lat_deg{0.0};
  double lon_deg{0.0};
  double alt_m{0.0};
};

// WGS-84 equatorial radius; one degree of arc is ~111,319.5 m.
inline constexpr double kEarthRadiusM = 6378137.0;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

// Equirectangular local tangent plane around `origin`. Adequate for flights
// spanning a few kilometres.
inline Vec3 geodetic_to_enu(const Geodetic& p, const Geodetic& origin) {
  if (!(std::abs(p.lat_deg) <= 90.0) || !(std::abs(p.lon_deg) <= 180.0)) {
    throw std::domain_error("geodetic_to_enu: latitude/longitude out of range");
  }
  const double east =
      (p.lon_deg - origin.lon_deg) * kDegToRad * kEarthRadiusM * std::cos(origin.lat_deg * kDegToRad);
  const double north = (p.lat_deg - origin.lat_deg) * kDegToRad * kEarthRadiusM;
  return {east, north, p.alt_m - origin.alt_m};
}

inline Geodetic enu_to_geodetic(const Vec3& enu, const Geodetic& origin) {
  const double lat = origin.lat_deg + enu.y / (kEarthRadiusM * kDegToRad);
  const double lon =
      origin.lon_deg + enu.x / (kEarthRadiusM * kDegToRad * std::cos(origin.lat_deg * kDegToRad));
  return {lat, lon, origin.alt_m + enu.z};
}

// ---------------------------------------------------------------------------
// Static world
// ---------------------------------------------------------------------------

struct Aabb {
  Vec3 min;
  Vec3 max;

  [[nodiscard]] bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }

  [[nodiscard]] bool contains(const Vec3& p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z &&
           p.z <= max.z;
  }

  [[nodiscard]] bool contains(const Aabb& b) const { return contains(b.min) && contains(b.max); }

  [[nodiscard]] Vec3 clamp(const Vec3& p) const {
    return {std::clamp(p.x, min.x, max.x), std::clamp(p.y, min.y, max.y),
            std::clamp(p.z, min.z, max.z)};
  }
};

struct BaseStation {
  std::string id;
  Vec3 position;
  double downtilt_alt{20.0};  // above this altitude the antenna gain penalty applies
};

struct WorldModel {
  Geodetic origin;
  Aabb bounds{{-1000.0, -1000.0, 0.0}, {1000.0, 1000.0, 200.0}};
  std::vector<Aabb> obstacles;
  std::vector<BaseStation> base_stations;

  // Throws ConfigError when an invariant is broken.
  void validate() const {
    if (!bounds.valid()) throw ConfigError("world: bounds must have min < max on every axis");
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      if (!obstacles[i].valid()) {
        throw ConfigError("world: obstacle " + std::to_string(i) + " has min >= max");
      }
      if (!bounds.contains(obstacles[i])) {
        throw ConfigError("world: obstacle " + std::to_string(i) + " lies outside bounds");
      }
    }
  }

  [[nodiscard]] bool inside_obstacle(const Vec3& p) const {
    return std::any_of(obstacles.begin(), obstacles.end(),
                       [&](const Aabb& b) { return b.contains(p); });
  }
};

namespace detail {

inline Vec3 vec_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected [x, y, z]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json vec_to_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "cannot open file");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path, std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace detail

inline WorldModel world_from_json(const nlohmann::json& j) {
  WorldModel w;
  try {
    if (j.contains("origin")) {
      const auto& o = j.at("origin");
      w.origin = {o.at("lat").get<double>(), o.at("lon").get<double>(), o.value("alt", 0.0)};
    }
    if (j.contains("bounds")) {
      const auto& b = j.at("bounds");
      w.bounds = {detail::vec_from_json(b.at("min")), detail::vec_from_json(b.at("max"))};
    }
    for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
      w.obstacles.push_back({detail::vec_from_json(o.at("min")), detail::vec_from_json(o.at("max"))});
    }
    for (const auto& bs : j.value("base_stations", nlohmann::json::array())) {
      w.base_stations.push_back({bs.at("id").get<std::string>(), detail::vec_from_json(bs.at("pos")),
                                 bs.value("downtilt_alt", 20.0)});
    }
  } catch (const std::exception& e) {
    throw ConfigError(std::string("world: ") + e.what());
  }
  w.validate();
  return w;
}

inline nlohmann::json world_to_json(const WorldModel& w) {
  nlohmann::json j;
  j["origin"] = {{"lat", w.origin.lat_deg}, {"lon", w.origin.lon_deg}, {"alt", w.origin.alt_m}};
  j["bounds"] = {{"min", detail::vec_to_json(w.bounds.min)}, {"max", detail::vec_to_json(w.bounds.max)}};
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : w.obstacles) {
    j["obstacles"].push_back({{"min", detail::vec_to_json(o.min)}, {"max", detail::vec_to_json(o.max)}});
  }
  j["base_stations"] = nlohmann::json::array();
  for (const auto& bs : w.base_stations) {
    j["base_stations"].push_back(
        {{"id", bs.id}, {"pos", detail::vec_to_json(bs.position)}, {"downtilt_alt", bs.downtilt_alt}});
  }
  return j;
}

inline WorldModel load_world(const std::string& path) {
  try {
    return world_from_json(detail::read_json_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path, e.what());
  }
}

// ---------------------------------------------------------------------------
// Virtual LiDAR
// ---------------------------------------------------------------------------

inline constexpr double kDefaultLidarRangeM = 40.0;

// Slab-method ray/box intersection. Returns the entry distance t >= 0, 0 when
// the origin is inside the box, nullopt when the ray misses.
inline std::optional<double> ray_box_distance(const Vec3& origin, const Vec3& dir, const Aabb& box) {
  double t_near = 0.0;
  double t_far = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = origin[axis];
    const double d = dir[axis];
    const double lo = box.min[axis];
    const double hi = box.max[axis];
    if (d == 0.0) {
      if (o < lo || o > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return std::nullopt;
  }
  return t_near;
}

// Distance along a unit ray to the nearest obstacle, nullopt ("no hit") when
// nothing lies within max_range.
inline std::optional<double> lidar_range(const WorldModel& world, const Vec3& origin, const Vec3& dir,
                                         double max_range = kDefaultLidarRangeM) {
  const double len = dir.norm();
  if (len == 0.0) throw std::domain_error("lidar_range: zero-length direction");
  if (std::abs(len - 1.0) > 1e-9) throw std::domain_error("lidar_range: direction must be a unit vector");
  if (!(max_range > 0.0)) throw std::domain_error("lidar_range: max_range must be positive");

  std::optional<double> best;
  for (const auto& box : world.obstacles) {
    if (auto t = ray_box_distance(origin, dir, box); t && *t <= max_range && (!best || *t < *best)) {
      best = t;
    }
  }
  return best;
}

// Body-x unit vector for a heading (yaw about +z, 0 = east).
inline Vec3 forward_axis(double heading_rad) { return {std::cos(heading_rad), std::sin(heading_rad), 0.0}; }

// True when no obstacle blocks the open segment a->b.
inline bool line_of_sight(const WorldModel& world, const Vec3& a, const Vec3& b) {
  const Vec3 d = b - a;
  const double len = d.norm();
  if (len == 0.0) return !world.inside_obstacle(a);
  const Vec3 dir = d * (1.0 / len);
  for (const auto& box : world.obstacles) {
    if (auto t = ray_box_distance(a, dir, box); t && *t < len) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Weather
// ---------------------------------------------------------------------------

struct WindSample {
  Vec3 velocity;    // mean wind, m/s
  double gust_std{0.0};
  Vec3 gust;        // per-tick turbulence drawn around the mean

  [[nodiscard]] Vec3 effective() const { return velocity + gust; }
};

struct WeatherRecord {
  std::optional<Vec3> position;  // absent = applies everywhere
  Vec3 wind;
  double gust_std{0.0};
};

// File-backed wind provider. Spatial records are resolved by nearest
// position (ties -> lowest index); a global record applies when no spatial
// record exists. Gusts are white Gaussian per tick, keyed on
// (seed, tick, record), so lookups are pure.
class WeatherProvider {
 public:
  WeatherProvider() = default;
  WeatherProvider(std::vector<WeatherRecord> records, std::uint64_t seed)
      : records_(std::move(records)), seed_(seed) {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!(records_[i].gust_std >= 0.0)) {
        throw ConfigError("weather: record " + std::to_string(i) + " has negative gust_std");
      }
    }
  }

  static WeatherProvider from_json(const nlohmann::json& j, std::uint64_t seed) {
    if (!j.is_array()) throw ConfigError("weather: expected a JSON array of records");
    std::vector<WeatherRecord> records;
    try {
      for (const auto& r : j) {
        WeatherRecord rec;
        if (r.contains("pos") && !r.at("pos").is_null()) rec.position = detail::vec_from_json(r.at("pos"));
        rec.wind = detail::vec_from_json(r.at("wind"));
        rec.gust_std = r.value("gust_std", 0.0);
        records.push_back(rec);
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("weather: ") + e.what());
    }
    return WeatherProvider(std::move(records), seed);
  }

  static WeatherProvider load(const std::string& path, std::uint64_t seed) {
    try {
      return from_json(detail::read_json_file(path), seed);
    } catch (const ConfigError& e) {
      throw ConfigError(path, e.what());
    }
  }

  [[nodiscard]] WindSample wind_at(const Vec3& position, std::int64_t tick) const {
    const auto idx = select(position);
    if (!idx) return {};
    const auto& rec = records_[*idx];
    WindSample s{rec.wind, rec.gust_std, {}};
    if (rec.gust_std > 0.0) {
      Rng rng{derive_seed(seed_, {static_cast<std::uint64_t>(Stream::kGust),
                                  static_cast<std::uint64_t>(tick), *idx})};
      std::normal_distribution<double> n(0.0, rec.gust_std);
      s.gust.x = n(rng);
      s.gust.y = n(rng);
      s.gust.z = n(rng);
    }
    return s;
  }

  [[nodiscard]] const std::vector<WeatherRecord>& records() const { return records_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }

 private:
  [[nodiscard]] std::optional<std::size_t> select(const Vec3& p) const {
    std::optional<std::size_t> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> global;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!records_[i].position) {
        if (!global) global = i;
        continue;
      }
      const double d2 = (*records_[i].position - p).norm2();
      if (d2 < best_d2) {
        best_d2 = d2;
        best = i;
      }
    }
    return best ? best : global;
  }

  std::vector<WeatherRecord> records_;
  std::uint64_t seed_{0};
};

}  // namespace twinlink
