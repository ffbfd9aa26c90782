#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "twinlink/errors.hpp"
#include "twinlink/latency_model.hpp"
#include "twinlink/rng.hpp"
#include "twinlink/uav_dynamics.hpp"

namespace twinlink {

enum class NlSource { kDb, kConstant, kZero };

inline NlSource nl_source_from_string(const std::string& s) {
  if (s == "db") return NlSource::kDb;
  if (s == "constant") return NlSource::kConstant;
  if (s == "zero") return NlSource::kZero;
  throw std::invalid_argument("link: unknown nl_source '" + s + "'");
}

inline const char* to_string(NlSource s) {
  switch (s) {
    case NlSource::kDb: return "db";
    case NlSource::kConstant: return "constant";
    case NlSource::kZero: return "zero";
  }
  return "zero";
}

struct LinkConfig {
  double cl_mean_ms{146.04};
  double cl_std_ms{27.23};
  NlSource nl_source{NlSource::kDb};
  double nl_const_ms{0.0};
  std::uint64_t seed{0};

  void validate() const {
    if (!(cl_std_ms >= 0.0)) throw std::invalid_argument("link: cl_std_ms must be >= 0");
    if (!(cl_mean_ms >= 0.0)) throw std::invalid_argument("link: cl_mean_ms must be >= 0");
    if (!(nl_const_ms >= 0.0)) throw std::invalid_argument("link: nl_const_ms must be >= 0");
  }
};

// Samples one-way latency: truncated-normal command latency plus a
// position-dependent network latency.
class LatencySampler {
 public:
  LatencySampler(const LinkConfig& cfg, std::shared_ptr<const MeasurementDb> db, Rng rng)
      : cfg_(cfg), db_(std::move(db)), rng_(std::move(rng)), cl_(cfg.cl_mean_ms, cfg.cl_std_ms) {}

  double sample_cl_ms() {
    if (cfg_.cl_std_ms == 0.0) return std::max(0.0, cfg_.cl_mean_ms);
    return std::max(0.0, cl_(rng_));
  }

  [[nodiscard]] double nl_ms(const Vec3& pos, const std::optional<std::string>& cell) const {
    switch (cfg_.nl_source) {
      case NlSource::kZero: return 0.0;
      case NlSource::kConstant: return cfg_.nl_const_ms;
      case NlSource::kDb: return db_ ? get_enl(*db_, pos, cell).nl_ms : 0.0;
    }
    return 0.0;
  }

  double sample_ms(const Vec3& pos, const std::optional<std::string>& cell) {
    return sample_cl_ms() + nl_ms(pos, cell);
  }

 private:
  LinkConfig cfg_;
  std::shared_ptr<const MeasurementDb> db_;
  Rng rng_;
  std::normal_distribution<double> cl_;
};

template <typename T>
struct InFlight {
  T item;
  std::int64_t enqueued_tick{0};
  std::int64_t deliver_at_tick{0};
  double sampled_latency_ms{0.0};
};

// Order-preserving delay queue on a fixed tick grid. Items never overtake:
// each delivery tick is clamped to be no earlier than its predecessor's.
template <typename T>
class DelayLine {
 public:
  explicit DelayLine(double tick_ms) : tick_ms_(tick_ms) {
    if (!(tick_ms > 0.0)) throw std::invalid_argument("DelayLine: tick_ms must be > 0");
  }

  const InFlight<T>& push(T item, double latency_ms, std::int64_t now_tick) {
    std::int64_t at = now_tick + static_cast<std::int64_t>(std::llround(latency_ms / tick_ms_));
    if (last_deliver_at_) at = std::max(at, *last_deliver_at_);
    last_deliver_at_ = at;
    queue_.push_back({std::move(item), now_tick, at, latency_ms});
    return queue_.back();
  }

  // Everything due at or before `now_tick`, in enqueue order.
  std::vector<InFlight<T>> drain(std::int64_t now_tick) {
    std::vector<InFlight<T>> out;
    while (!queue_.empty() && queue_.front().deliver_at_tick <= now_tick) {
      out.push_back(std::move(queue_.front()));
      queue_.pop_front();
    }
    return out;
  }

  [[nodiscard]] std::size_t pending() const { return queue_.size(); }
  [[nodiscard]] double tick_ms() const { return tick_ms_; }

 private:
  double tick_ms_;
  std::deque<InFlight<T>> queue_;
  std::optional<std::int64_t> last_deliver_at_;
};

// Edge -> physical UAV command channel.
class CommandLink {
 public:
  CommandLink(const LinkConfig& cfg, double tick_ms, std::shared_ptr<const MeasurementDb> db,
              Stream stream = Stream::kCommandLink)
      : sampler_(cfg, std::move(db), make_rng(cfg.seed, stream)), line_(tick_ms) {
    cfg.validate();
  }

  InFlight<PilotCommand> enqueue(const PilotCommand& cmd, const Vec3& uav_pos, std::int64_t now_tick,
                                 const std::optional<std::string>& cell = std::nullopt) {
    if (last_seq_ && cmd.seq <= *last_seq_) {
      throw ProtocolError("link: command seq " + std::to_string(cmd.seq) +
                          " not greater than last enqueued " + std::to_string(*last_seq_));
    }
    last_seq_ = cmd.seq;
    const double latency = sampler_.sample_ms(uav_pos, cell);
    return line_.push(cmd, latency, now_tick);
  }

  std::vector<PilotCommand> drain(std::int64_t now_tick) {
    std::vector<PilotCommand> out;
    for (auto& f : line_.drain(now_tick)) out.push_back(std::move(f.item));
    return out;
  }

  [[nodiscard]] std::size_t pending() const { return line_.pending(); }

 private:
  LatencySampler sampler_;
  DelayLine<PilotCommand> line_;
  std::optional<std::uint64_t> last_seq_;
};

}  // namespace twinlink
