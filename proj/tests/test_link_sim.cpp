#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>
#include <set>

#include "twinlink/link_sim.hpp"

using namespace twinlink;

namespace {

PilotCommand cmd(std::uint64_t seq) { return {seq, 0, {1.0, 0.0, 0.0}, 0.0, CommandKind::kMotion}; }

LinkConfig fixed(double cl_ms) {
  LinkConfig c;
  c.cl_mean_ms = cl_ms;
  c.cl_std_ms = 0.0;
  c.nl_source = NlSource::kZero;
  return c;
}

}  // namespace

TEST(Enqueue, ZeroLatencyDeliversNow) {
  CommandLink link(fixed(0.0), 10.0, nullptr);
  EXPECT_EQ(link.enqueue(cmd(1), {}, 42).deliver_at_tick, 42);
}

TEST(Enqueue, MeanLatencyRoundsToFifteenTicks) {
  CommandLink link(fixed(146.04), 10.0, nullptr);
  const auto f = link.enqueue(cmd(1), {}, 100);
  EXPECT_EQ(f.deliver_at_tick, 115);
  EXPECT_DOUBLE_EQ(f.sampled_latency_ms, 146.04);
}

TEST(Enqueue, ConstantAndDbNetworkLatency) {
  LinkConfig c = fixed(100.0);
  c.nl_source = NlSource::kConstant;
  c.nl_const_ms = 30.0;
  CommandLink constant(c, 10.0, nullptr);
  EXPECT_EQ(constant.enqueue(cmd(1), {}, 0).deliver_at_tick, 13);

  LatencyRecord r;
  r.nl_ms = 50.0;
  c.nl_source = NlSource::kDb;
  CommandLink from_db(c, 10.0, std::make_shared<MeasurementDb>(std::vector<LatencyRecord>{r}));
  EXPECT_EQ(from_db.enqueue(cmd(1), {}, 0).deliver_at_tick, 15);
}

TEST(Enqueue, OutOfOrderSeqIsProtocolError) {
  CommandLink link(fixed(0.0), 10.0, nullptr);
  link.enqueue(cmd(5), {}, 0);
  EXPECT_THROW(link.enqueue(cmd(5), {}, 1), ProtocolError);
  EXPECT_THROW(link.enqueue(cmd(4), {}, 1), ProtocolError);
  EXPECT_NO_THROW(link.enqueue(cmd(6), {}, 1));
}

TEST(Sampler, DefaultsMatchMeasuredMoments) {
  LatencySampler s(LinkConfig{}, nullptr, make_rng(2024, Stream::kCommandLink));
  const int n = 10000;
  double sum = 0.0;
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.sample_cl_ms();
    ASSERT_GE(x, 0.0);
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt((sum2 - n * mean * mean) / (n - 1));
  EXPECT_NEAR(mean, 146.04, 1.5);
  EXPECT_NEAR(sd, 27.23, 1.5);
}

TEST(Sampler, TruncatesAtZero) {
  LinkConfig c;
  c.cl_mean_ms = 0.0;
  c.cl_std_ms = 50.0;
  LatencySampler s(c, nullptr, make_rng(1, Stream::kCommandLink));
  for (int i = 0; i < 1000; ++i) ASSERT_GE(s.sample_cl_ms(), 0.0);
}

TEST(Drain, EmptyQueue) {
  CommandLink link(fixed(0.0), 10.0, nullptr);
  EXPECT_TRUE(link.drain(0).empty());
}

TEST(Drain, SameTickInSeqOrder) {
  CommandLink link(fixed(50.0), 10.0, nullptr);
  link.enqueue(cmd(1), {}, 0);
  link.enqueue(cmd(2), {}, 0);
  const auto out = link.drain(5);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].seq, 1u);
  EXPECT_EQ(out[1].seq, 2u);
}

TEST(Drain, BoundaryIsInclusive) {
  CommandLink link(fixed(200.0), 10.0, nullptr);
  EXPECT_EQ(link.enqueue(cmd(1), {}, 0).deliver_at_tick, 20);
  EXPECT_TRUE(link.drain(19).empty());
  EXPECT_EQ(link.drain(20).size(), 1u);
  EXPECT_EQ(link.pending(), 0u);
}

TEST(DelayLine, NeverOvertakes) {
  DelayLine<int> line(10.0);
  EXPECT_EQ(line.push(1, 200.0, 0).deliver_at_tick, 20);
  EXPECT_EQ(line.push(2, 10.0, 1).deliver_at_tick, 20);  // clamped behind #1
  EXPECT_EQ(line.push(3, 10.0, 30).deliver_at_tick, 31);
  EXPECT_THROW(DelayLine<int>(0.0), std::invalid_argument);
}

TEST(Properties, ConservationOrderAndDeterminism) {
  auto run = [](std::uint64_t seed) {
    LinkConfig c;
    c.seed = seed;
    c.nl_source = NlSource::kConstant;
    c.nl_const_ms = 25.0;
    CommandLink link(c, 10.0, nullptr);
    std::vector<std::pair<std::int64_t, std::uint64_t>> schedule;
    std::uint64_t seq = 0;
    for (std::int64_t t = 0; t < 5000; ++t) {
      if (t % 5 == 0 && t < 4000) link.enqueue(cmd(++seq), {}, t);
      for (const auto& c2 : link.drain(t)) schedule.emplace_back(t, c2.seq);
    }
    EXPECT_EQ(link.pending(), 0u);
    EXPECT_EQ(schedule.size(), seq);
    return schedule;
  };
  const auto a = run(7);
  const auto b = run(7);
  const auto c = run(8);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(seen.insert(a[i].second).second);
    if (i > 0) {
      EXPECT_GT(a[i].second, a[i - 1].second);
      EXPECT_GE(a[i].first, a[i - 1].first);
    }
  }
}

TEST(Config, ParsesSourcesAndValidates) {
  EXPECT_EQ(nl_source_from_string("db"), NlSource::kDb);
  EXPECT_EQ(nl_source_from_string("constant"), NlSource::kConstant);
  EXPECT_EQ(nl_source_from_string("zero"), NlSource::kZero);
  EXPECT_THROW(nl_source_from_string("wifi"), std::invalid_argument);
  LinkConfig c;
  c.cl_std_ms = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}
