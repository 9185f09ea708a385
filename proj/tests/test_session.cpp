#include <gtest/gtest.h>

#include "evg/session.hpp"
#include "test_support.hpp"

namespace evg {
namespace {

using namespace std::chrono_literals;

std::vector<PointerSample> sweep(double x0, double x1, Timestamp duration, Timestamp step = 10'000) {
  std::vector<PointerSample> out;
  for (Timestamp t = 0; t <= duration; t += step) {
    const double u = static_cast<double>(t) / static_cast<double>(duration);
    out.push_back({x0 + (x1 - x0) * u, 0.5, false, t});
  }
  return out;
}

TEST(Pointer, StationaryPointerIsSilent) {
  std::vector<PointerSample> still;
  for (Timestamp t = 0; t <= 500'000; t += 16'000) still.push_back({0.3, 0.6, false, t});
  EXPECT_TRUE(pointer_to_events(still, {64, 64}, EsimConfig{}).events.empty());
  EXPECT_TRUE(pointer_to_events({{0.1, 0.1, false, 0}}, {64, 64}, EsimConfig{}).events.empty());
}

TEST(Pointer, SweepFiresBrighteningAheadOfTheThumbAndDarkeningBehind) {
  const SensorGeometry g{64, 64};
  const auto samples = sweep(0.1, 0.9, 600'000);
  const EventStream s = pointer_to_events(samples, g, EsimConfig{});
  ASSERT_TRUE(validate_stream(s).ok());
  ASSERT_GT(s.events.size(), 100u);
  PointerRenderer renderer(g, EsimConfig{});
  // In every 50 ms slice the thumb, brighter than everything under it, moves
  // right: positive events sit right of its center and negative events left.
  for (Timestamp t0 = 0; t0 < 600'000; t0 += 50'000) {
    double pos = 0, neg = 0;
    int npos = 0, nneg = 0;
    for (const Event& e : s.events) {
      if (e.t < t0 || e.t >= t0 + 50'000) continue;
      (e.p ? pos : neg) += e.x + 0.5;
      ++(e.p ? npos : nneg);
    }
    ASSERT_GT(npos, 0);
    ASSERT_GT(nneg, 0);
    const double u = (static_cast<double>(t0) + 25'000) / 600'000;
    const double thumb_x = renderer.pose(0.1 + 0.8 * u, 0.5, 0.0).thumb_x;
    EXPECT_GT(pos / npos, thumb_x) << "slice " << t0;
    EXPECT_LT(neg / nneg, thumb_x) << "slice " << t0;
  }
}

TEST(Pointer, MirrorFlipsTheSweep) {
  PointerScene mirrored;
  mirrored.mirror_x = true;
  PointerRenderer plain({64, 64}, EsimConfig{}), flipped({64, 64}, EsimConfig{}, mirrored);
  EXPECT_LT(plain.pose(0.2, 0.5, 0).thumb_x, plain.pose(0.8, 0.5, 0).thumb_x);
  EXPECT_GT(flipped.pose(0.2, 0.5, 0).thumb_x, flipped.pose(0.8, 0.5, 0).thumb_x);
  EXPECT_DOUBLE_EQ(flipped.pose(0.2, 0.5, 0).thumb_x, plain.pose(0.8, 0.5, 0).thumb_x);
}

TEST(Pointer, PressPullsTheThumbUp) {
  PointerRenderer r({64, 64}, EsimConfig{});
  EXPECT_LT(r.pose(0.5, 0.5, 1.0).thumb_y, r.pose(0.5, 0.5, 0.0).thumb_y);
  std::vector<PointerSample> press;
  for (Timestamp t = 0; t <= 400'000; t += 20'000) press.push_back({0.5, 0.5, t >= 100'000, t});
  EXPECT_FALSE(pointer_to_events(press, {64, 64}, EsimConfig{}).events.empty());
}

TEST(Pointer, ConversionIsDeterministicAndChunkingInvariant) {
  const auto samples = sweep(0.8, 0.2, 400'000, 7'000);
  const auto a = pointer_to_events(samples, {32, 32}, EsimConfig{});
  EXPECT_EQ(a.events, pointer_to_events(samples, {32, 32}, EsimConfig{}).events);
  PointerRenderer r({32, 32}, EsimConfig{});
  std::vector<Event> incremental;
  for (const auto& s : samples) r.add(s, incremental);
  EXPECT_EQ(incremental, a.events);
}

TEST(Pointer, BackwardsSamplesAreIgnored) {
  PointerRenderer r({32, 32}, EsimConfig{});
  std::vector<Event> out;
  r.add({0.2, 0.5, false, 100'000}, out);
  r.add({0.6, 0.5, false, 200'000}, out);
  const auto n = out.size();
  r.add({0.9, 0.5, false, 150'000}, out);
  EXPECT_EQ(out.size(), n);
}

SessionOptions data_options(int repetitions) {
  SessionOptions o;
  o.clock = SessionClock::kData;
  o.trial.repetitions = repetitions;
  o.trial.seed = 21;
  return o;
}

PipelineConfig session_pipeline() {
  PipelineConfig c;
  c.policy = ThresholdPolicy::uniform(0.4);
  return c;
}

TEST(Session, DataModeMatchesTheOfflineProtocol) {
  const auto& tm = test::trained_tiny();
  const auto options = data_options(3);
  const auto performer = simulator_performer({16, 16}, EsimConfig{}, 5);
  const TrialResult reference =
      run_trial_protocol(tm.model, tm.params, session_pipeline(), performer, options.trial);

  Session session("s1", tm.model, tm.params, session_pipeline(), options);
  const EventStream stream = build_trial_stream(session.schedule(), performer, {16, 16});
  std::size_t i = 0;
  std::size_t prompts = 0;
  for (Timestamp t = 100'000; t <= schedule_end(session.schedule()) + 100'000; t += 100'000) {
    std::vector<Event> batch;
    while (i < stream.events.size() && stream.events[i].t <= t) batch.push_back(stream.events[i++]);
    session.ingest_events(std::move(batch));
    session.advance_to(t);
    for (const auto& m : session.take_messages()) prompts += m["type"] == "prompt";
  }
  session.flush();
  EXPECT_EQ(prompts, 9u);
  EXPECT_TRUE(session.finished());
  const TrialResult r = session.result();
  EXPECT_EQ(r.schedule, reference.schedule);
  EXPECT_EQ(r.records, reference.records);
  EXPECT_EQ(r.scores, reference.scores);
  ASSERT_EQ(r.detections.size(), reference.detections.size());
  for (std::size_t k = 0; k < r.detections.size(); ++k) {
    EXPECT_TRUE(r.detections[k].same_detection(reference.detections[k]));
  }
}

TEST(Session, SilenceTimesOutEveryPromptAndReportsStats) {
  const auto& tm = test::trained_tiny();
  Session session("s2", tm.model, tm.params, session_pipeline(), data_options(10));
  session.advance_to(schedule_end(session.schedule()));
  session.flush();
  const auto messages = session.take_messages();
  std::size_t prompts = 0;
  const Json* last_stats = nullptr;
  for (const auto& m : messages) {
    if (m["type"] == "prompt") ++prompts;
    if (m["type"] == "stats") last_stats = &m;
  }
  EXPECT_EQ(prompts, 30u);
  ASSERT_NE(last_stats, nullptr);
  EXPECT_EQ((*last_stats)["records"], 30);
  EXPECT_EQ((*last_stats)["finished"], true);
  const TrialResult r = session.result();
  ASSERT_EQ(r.records.size(), 30u);
  for (const auto& rec : r.records) EXPECT_EQ(rec.outcome, Outcome::kTimeout);
  const Json report = session.report();
  EXPECT_EQ(report["records"].size(), 30u);
  EXPECT_EQ(report["clock"], "data");
}

TEST(Session, AdvanceNeverRunsPastTheSchedule) {
  const auto& tm = test::trained_tiny();
  Session session("s3", tm.model, tm.params, session_pipeline(), data_options(1));
  session.advance_to(1'000'000'000);
  session.flush();
  EXPECT_EQ(session.session_time(), schedule_end(session.schedule()));
  session.tick();  // ignored in data mode
  EXPECT_TRUE(session.finished());
}

TEST(Session, WallClockDrivesPromptsAndScoring) {
  const auto& tm = test::trained_tiny();
  SessionOptions options;
  options.trial.repetitions = 2;
  Session session("w1", tm.model, tm.params, session_pipeline(), options);
  EXPECT_FALSE(session.started());
  const auto t0 = Session::Clock::now();
  session.tick(t0 + 10s);  // not started yet
  EXPECT_TRUE(session.take_messages().empty());

  session.start(t0);
  session.advance_to(50'000'000);  // ignored in wall mode
  session.tick(t0 + 5s);
  session.flush();
  const auto messages = session.take_messages();
  std::vector<Json> prompts;
  for (const auto& m : messages) {
    if (m["type"] == "prompt") prompts.push_back(m);
  }
  // Prompts open at 1.5 s and 5.0 s.
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[0]["window_start_us"], 1'500'000);
  EXPECT_EQ(prompts[1]["index"], 1);
  // Windows are evaluated up to now minus the slack; only the newest one runs.
  const auto stats = session.pipeline_stats();
  EXPECT_EQ(stats.windows_processed, 1u);
  EXPECT_EQ(stats.windows_skipped, (5'000'000 - 60'000) / 80'000 - 1);
  EXPECT_EQ(session.result().records.size(), 1u);

  session.tick(t0 + 60s);
  session.flush();
  EXPECT_TRUE(session.finished());
  EXPECT_EQ(session.result().records.size(), 6u);
}

TEST(Session, WallModePointerSamplesAreRebasedOnFirstArrival) {
  const auto& tm = test::trained_tiny();
  Session session("w2", tm.model, tm.params, session_pipeline(), SessionOptions{});
  // Client clock far from zero; only differences matter.
  auto samples = sweep(0.2, 0.8, 300'000);
  for (auto& s : samples) s.t += 987'654'321;
  session.ingest_pointer(samples);
  EXPECT_TRUE(session.started());
  session.tick(Session::Clock::now() + 2s);
  session.flush();
  EXPECT_GT(session.pipeline_stats().events_accepted, 0u);
  EXPECT_EQ(session.pipeline_stats().events_dropped, 0u);
}

TEST(Session, ConnectionFlagAndActivity) {
  const auto& tm = test::trained_tiny();
  Session session("c1", tm.model, tm.params, session_pipeline(), data_options(1));
  const auto before = session.last_active();
  std::this_thread::sleep_for(2ms);
  session.set_connected(true);
  EXPECT_TRUE(session.connected());
  EXPECT_GT(session.last_active(), before);
  session.set_connected(false);
  EXPECT_FALSE(session.connected());
}

}  // namespace
}  // namespace evg
