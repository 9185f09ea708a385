#include <gtest/gtest.h>

#include <map>

#include "evg/protocol.hpp"
#include "test_support.hpp"

namespace evg {
namespace {

using G = GestureClass;

TEST(Schedule, LayoutAlternatesGapAndWindow) {
  TrialConfig c;
  const auto s = make_schedule(c, 250'000);
  ASSERT_EQ(s.size(), 30u);
  Timestamp t = 250'000;
  for (const auto& slot : s) {
    EXPECT_EQ(slot.window_start, t + 1'500'000);
    EXPECT_EQ(slot.window_end, slot.window_start + 2'000'000);
    t = slot.window_end;
  }
  EXPECT_EQ(schedule_end(s), 250'000 + 30 * 3'500'000ULL);
}

TEST(Schedule, EachGesturePromptedRepetitionsTimes) {
  TrialConfig c;
  c.repetitions = 7;
  std::map<G, int> counts;
  for (const auto& slot : make_schedule(c)) ++counts[slot.gesture];
  EXPECT_EQ(counts.size(), 3u);
  for (const auto& [g, n] : counts) EXPECT_EQ(n, 7);
}

TEST(Schedule, SeededShuffle) {
  TrialConfig a, b;
  b.seed = 2;
  EXPECT_EQ(make_schedule(a), make_schedule(a));
  EXPECT_NE(make_schedule(a), make_schedule(b));
  // Not simply the repeated gesture list.
  const auto s = make_schedule(a);
  bool shuffled = false;
  for (std::size_t i = 0; i < s.size(); ++i) shuffled |= s[i].gesture != a.gestures[i % 3];
  EXPECT_TRUE(shuffled);
}

TEST(Schedule, RejectsBadConfigs) {
  TrialConfig c;
  c.gestures = {};
  EXPECT_THROW(make_schedule(c), std::invalid_argument);
  c.gestures = {G::kNoHand};
  EXPECT_THROW(make_schedule(c), std::invalid_argument);
  c = {};
  c.repetitions = 0;
  EXPECT_THROW(make_schedule(c), std::invalid_argument);
  c = {};
  c.window_s = 0;
  EXPECT_THROW(make_schedule(c), std::invalid_argument);
}

TEST(TrialStream, PerformerStreamsAreShiftedAndClipped) {
  const SensorGeometry g{16, 16};
  const std::vector<PromptSlot> schedule{{G::kSwipeLeft, 1'000'000, 1'500'000},
                                         {G::kSwipeRight, 3'000'000, 3'500'000}};
  std::vector<std::size_t> indices;
  const Performer performer = [&](G, std::size_t index) {
    indices.push_back(index);
    return EventStream{g, {{1, 1, 1, 0}, {2, 2, 0, 499'999}, {3, 3, 1, 500'000}, {4, 4, 1, 900'000}}};
  };
  const auto s = build_trial_stream(schedule, performer, g);
  const std::vector<Timestamp> times{1'000'000, 1'499'999, 3'000'000, 3'499'999};
  ASSERT_EQ(s.events.size(), times.size());
  for (std::size_t i = 0; i < times.size(); ++i) EXPECT_EQ(s.events[i].t, times[i]);
  EXPECT_TRUE(validate_stream(s).ok());
  EXPECT_EQ(indices, (std::vector<std::size_t>{0, 0}));
}

TEST(TrialStream, RepeatedGesturesGetIncreasingIndices) {
  const SensorGeometry g{8, 8};
  TrialConfig c;
  c.repetitions = 4;
  std::map<G, std::vector<std::size_t>> seen;
  build_trial_stream(make_schedule(c), [&](G gesture, std::size_t i) {
    seen[gesture].push_back(i);
    return EventStream{g, {}};
  }, g);
  for (const auto& [gesture, idx] : seen) EXPECT_EQ(idx, (std::vector<std::size_t>{0, 1, 2, 3}));
}

TEST(TrialStream, GeometryMismatchThrows) {
  const Performer performer = [](G, std::size_t) { return EventStream{{8, 8}, {}}; };
  EXPECT_THROW(build_trial_stream(make_schedule({}), performer, {16, 16}), std::invalid_argument);
}

TEST(TrialProtocol, SilentPerformerTimesOutEverywhere) {
  const auto& tm = test::trained_tiny();
  PipelineConfig pc;
  pc.policy = ThresholdPolicy::uniform(0.5);
  TrialConfig c;
  c.repetitions = 3;
  const auto result = run_trial_protocol(tm.model, tm.params, pc,
                                         [](G, std::size_t) { return EventStream{{16, 16}, {}}; }, c);
  ASSERT_EQ(result.records.size(), 9u);
  for (const auto& r : result.records) EXPECT_EQ(r.outcome, Outcome::kTimeout);
  for (const auto& s : result.scores) {
    EXPECT_EQ(*s.recall.value(), 0.0);
    EXPECT_EQ(s.timeouts, 3u);
  }
}

TEST(TrialProtocol, SimulatorPerformerIsDeterministicAndScoresEveryPrompt) {
  const auto& tm = test::trained_tiny();
  PipelineConfig pc;
  pc.policy = ThresholdPolicy::uniform(0.4);
  TrialConfig c;
  c.repetitions = 2;
  const auto performer = simulator_performer({16, 16}, EsimConfig{}, 99);
  const auto a = run_trial_protocol(tm.model, tm.params, pc, performer, c);
  const auto b = run_trial_protocol(tm.model, tm.params, pc, performer, c);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.scores, b.scores);
  ASSERT_EQ(a.records.size(), 6u);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].prompted, a.schedule[i].gesture);
  // The scores are exactly the scoring of the recorded detections.
  const auto rescored = score_trial(a.schedule, a.detections, c.gestures);
  EXPECT_EQ(rescored.records, a.records);
  EXPECT_EQ(rescored.gap_detections, a.gap_detections);
}

}  // namespace
}  // namespace evg
