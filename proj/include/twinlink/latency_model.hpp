#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinlink/errors.hpp"
#include "twinlink/geo_world.hpp"
#include "twinlink/rng.hpp"
#include "twinlink/vec3.hpp"

namespace twinlink {

// One row of the measurement database.
struct LatencyRecord {
  double lat{0.0};
  double lon{0.0};
  double alt{0.0};
  Vec3 position;  // ENU, derived from lat/lon/alt and the world origin
  std::string cell_id;
  double nl_ms{0.0};
  double throughput_mbps{0.0};
  std::int64_t timestamp_ms{0};
};

inline nlohmann::json record_to_json(const LatencyRecord& r) {
  return {{"lat", r.lat},         {"lon", r.lon},
          {"alt", r.alt},         {"cell_id", r.cell_id},
          {"nl_ms", r.nl_ms},     {"throughput_mbps", r.throughput_mbps},
          {"timestamp", r.timestamp_ms}};
}

inline LatencyRecord record_from_json(const nlohmann::json& j, const Geodetic& origin) {
  LatencyRecord r;
  r.lat = j.at("lat").get<double>();
  r.lon = j.at("lon").get<double>();
  r.alt = j.at("alt").get<double>();
  r.cell_id = j.at("cell_id").get<std::string>();
  r.nl_ms = j.at("nl_ms").get<double>();
  r.throughput_mbps = j.value("throughput_mbps", 0.0);
  r.timestamp_ms = j.value("timestamp", std::int64_t{0});
  if (!(r.nl_ms >= 0.0) || !(r.throughput_mbps >= 0.0)) {
    throw std::invalid_argument("nl_ms and throughput_mbps must be >= 0");
  }
  r.position = geodetic_to_enu({r.lat, r.lon, r.alt}, origin);
  return r;
}

// Result of an ENL lookup. `available` is false when the database is empty
// and the configured fallback was returned.
struct EnlEstimate {
  double nl_ms{0.0};
  bool available{false};
  std::optional<std::size_t> record;
};

class MeasurementDb {
 public:
  MeasurementDb() = default;
  explicit MeasurementDb(std::vector<LatencyRecord> records, double fallback_ms = 0.0)
      : records_(std::move(records)), fallback_ms_(fallback_ms) {
    for (std::size_t i = 0; i < records_.size(); ++i) by_cell_[records_[i].cell_id].push_back(i);
  }

  static MeasurementDb load_jsonl(const std::string& path, const Geodetic& origin,
                                  double fallback_ms = 0.0) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open measurement file");
    std::vector<LatencyRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(record_from_json(nlohmann::json::parse(line), origin));
      } catch (const std::exception& e) {
        throw ConfigError(path, "line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    return MeasurementDb(std::move(records), fallback_ms);
  }

  [[nodiscard]] const std::vector<LatencyRecord>& records() const { return records_; }
  [[nodiscard]] const std::map<std::string, std::vector<std::size_t>>& by_cell() const { return by_cell_; }
  [[nodiscard]] bool empty() const { return records_.empty(); }
  [[nodiscard]] std::size_t size() const { return records_.size(); }
  [[nodiscard]] double fallback_ms() const { return fallback_ms_; }

 private:
  std::vector<LatencyRecord> records_;
  std::map<std::string, std::vector<std::size_t>> by_cell_;
  double fallback_ms_{0.0};
};

inline void write_measurements_jsonl(std::ostream& out, const std::vector<LatencyRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

// Estimated network latency at `u`: NL of the nearest record (3D ENU
// distance), searched among `current_cell`'s records when that cell has any,
// otherwise over the whole database. Exact distance ties go to the lowest
// record index.
inline EnlEstimate get_enl(const MeasurementDb& db, const Vec3& u,
                           const std::optional<std::string>& current_cell = std::nullopt) {
  if (db.empty()) return {db.fallback_ms(), false, std::nullopt};

  const auto& recs = db.records();
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  auto consider = [&](std::size_t i) {
    const double d2 = (recs[i].position - u).norm2();
    if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
      best_d2 = d2;
      best = i;
    }
  };

  const std::vector<std::size_t>* subset = nullptr;
  if (current_cell) {
    if (auto it = db.by_cell().find(*current_cell); it != db.by_cell().end()) subset = &it->second;
  }
  if (subset) {
    for (auto i : *subset) consider(i);
  } else {
    for (std::size_t i = 0; i < recs.size(); ++i) consider(i);
  }
  return {recs[best].nl_ms, true, best};
}

// ---------------------------------------------------------------------------
// Radio: cell attachment, handover, throughput regimes
// ---------------------------------------------------------------------------

struct RadioConfig {
  double base_nl_ms{25.0};
  double handover_penalty_ms{30.0};
  double handover_window_ms{500.0};  // a handover this recent adds the penalty
  double nl_noise_std_ms{5.0};       // half-normal, so NL never drops below base
  double altitude_threshold_m{20.0};
  double throughput_low_alt_mbps{60.0};
  double throughput_high_alt_mbps{10.0};
  double throughput_spread{0.1};       // relative std of throughput around the regime mean
  double gain_jitter_base_m{20.0};     // effective-gain perturbation just above downtilt
  double gain_jitter_m_per_m{0.6};     // and its growth per metre of extra height
  double fallback_nl_ms{0.0};
};

struct LinkQuality {
  std::string cell_id;  // empty when there is no coverage
  double nl_ms{0.0};
  double throughput_mbps{0.0};
  bool handover{false};
  bool coverage{true};
};

// Per-session serving-cell state. Below a base station's antenna downtilt
// altitude that station competes on plain 2D distance; above it, only
// stations in line of sight compete and their effective gain is perturbed
// by seeded noise that grows with height, which raises the handover rate.
class CellTracker {
 public:
  CellTracker(const RadioConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), rng_(make_rng(seed, Stream::kRadio)) {}

  LinkQuality attach(const WorldModel& world, const Vec3& u, std::int64_t now_ms) {
    if (world.base_stations.empty()) {
      return {"", cfg_.fallback_nl_ms, 0.0, false, false};
    }

    std::normal_distribution<double> unit(0.0, 1.0);
    std::optional<std::size_t> best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_any;
    double best_any_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < world.base_stations.size(); ++i) {
      const auto& bs = world.base_stations[i];
      const double z = unit(rng_);  // drawn unconditionally to keep the stream aligned
      double score = -distance_2d(u, bs.position);
      bool candidate = true;
      if (u.z > bs.downtilt_alt) {
        score += z * (cfg_.gain_jitter_base_m + cfg_.gain_jitter_m_per_m * (u.z - bs.downtilt_alt));
        candidate = line_of_sight(world, u, bs.position);
      }
      if (score > best_any_score) {
        best_any_score = score;
        best_any = i;
      }
      if (candidate && score > best_score) {
        best_score = score;
        best = i;
      }
    }
    const auto& serving = world.base_stations[best ? *best : *best_any];

    LinkQuality q;
    q.cell_id = serving.id;
    q.handover = previous_cell_.has_value() && *previous_cell_ != q.cell_id;
    if (q.handover) last_handover_ms_ = now_ms;
    previous_cell_ = q.cell_id;

    std::normal_distribution<double> noise(0.0, 1.0);
    q.nl_ms = cfg_.base_nl_ms + std::abs(noise(rng_)) * cfg_.nl_noise_std_ms;
    if (last_handover_ms_ && static_cast<double>(now_ms - *last_handover_ms_) < cfg_.handover_window_ms) {
      q.nl_ms += cfg_.handover_penalty_ms;
    }
    const double mean =
        u.z > cfg_.altitude_threshold_m ? cfg_.throughput_high_alt_mbps : cfg_.throughput_low_alt_mbps;
    q.throughput_mbps = std::max(0.0, mean * (1.0 + cfg_.throughput_spread * noise(rng_)));
    return q;
  }

  [[nodiscard]] const std::optional<std::string>& previous_cell() const { return previous_cell_; }

 private:
  RadioConfig cfg_;
  Rng rng_;
  std::optional<std::string> previous_cell_;
  std::optional<std::int64_t> last_handover_ms_;
};

struct TrajectorySample {
  std::int64_t t_ms{0};
  Vec3 position;
  double speed{0.0};
};

// Synthetic measurement campaign: one LatencyRecord per trajectory sample.
inline std::vector<LatencyRecord> generate_measurements(const WorldModel& world,
                                                        const std::vector<TrajectorySample>& trajectory,
                                                        const RadioConfig& cfg, std::uint64_t seed) {
  CellTracker tracker(cfg, seed);
  std::vector<LatencyRecord> out;
  out.reserve(trajectory.size());
  for (const auto& s : trajectory) {
    const auto q = tracker.attach(world, s.position, s.t_ms);
    const auto geo = enu_to_geodetic(s.position, world.origin);
    out.push_back({geo.lat_deg, geo.lon_deg, geo.alt_m, s.position, q.cell_id, q.nl_ms,
                   q.throughput_mbps, s.t_ms});
  }
  return out;
}

}  // namespace twinlink
