#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "evg/simulator.hpp"

namespace evg {
namespace {

LogFrame ramp_frame(double t, double base, double slope) {
  LogFrame f;
  f.geometry = {1, 1};
  f.values = {base + slope * t};
  f.timestamp = seconds_to_us(t);
  return f;
}

struct RampCase {
  double slope;     // log-intensity units per second
  double contrast;  // C
  double duration;  // s
  double base;
};

// Closed-form oracle for a single pixel ramping linearly from `base`: the
// k-th crossing happens when |slope| * t = k * C.
void check_ramp(const RampCase& rc, const EsimConfig& esim) {
  const EventStream s = generate_events(
      {1, 1}, esim, rc.duration, [&](double t) { return ramp_frame(t, rc.base, rc.slope); });
  const double delta = std::abs(rc.slope) * rc.duration;
  const auto expected = static_cast<std::size_t>(std::floor(delta / rc.contrast));
  ASSERT_EQ(s.events.size(), expected) << "slope " << rc.slope << " C " << rc.contrast;
  const double period_us = 1e6 / esim.sample_rate;
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    const Event& e = s.events[k];
    EXPECT_EQ(e.p, rc.slope > 0 ? 1 : 0);
    const double crossing_us = (k + 1) * rc.contrast / std::abs(rc.slope) * 1e6;
    EXPECT_LE(std::abs(static_cast<double>(e.t) - crossing_us), period_us) << "event " << k;
  }
}

TEST(EventGenerator, RampUpTwoAndAHalfThresholds) {
  EsimConfig esim;
  check_ramp({2.5 * esim.contrast_threshold_pos, esim.contrast_threshold_pos, 1.0, 0.3}, esim);
}

TEST(EventGenerator, RampDownThreePointTwoThresholds) {
  EsimConfig esim;
  const double c = esim.contrast_threshold_neg;
  const EventStream s =
      generate_events({1, 1}, esim, 1.0, [&](double t) { return ramp_frame(t, 0.0, -3.2 * c); });
  ASSERT_EQ(s.events.size(), 3u);
  for (const Event& e : s.events) EXPECT_EQ(e.p, 0);
}

TEST(EventGenerator, RandomLinearRampsMatchClosedForm) {
  detail::Rng rng(31337);
  int checked = 0;
  while (checked < 200) {
    RampCase rc;
    rc.contrast = rng.uniform(0.05, 0.6);
    rc.duration = rng.uniform(0.05, 2.0);
    rc.slope = rng.uniform(0.2, 12.0) * (rng.bernoulli(0.5) ? 1 : -1);
    rc.base = rng.uniform(-1.0, 1.0);
    const double ratio = std::abs(rc.slope) * rc.duration / rc.contrast;
    // Exactly-integer ratios sit on a floating-point tie; the oracle does not
    // define which side they fall on.
    if (std::abs(ratio - std::round(ratio)) < 1e-6) continue;
    EsimConfig esim;
    esim.contrast_threshold_pos = esim.contrast_threshold_neg = rc.contrast;
    esim.sample_rate = rng.uniform(200.0, 2000.0);
    check_ramp(rc, esim);
    ++checked;
  }
}

TEST(EventGenerator, ConstantSceneWithoutNoiseIsSilent) {
  const ScenarioSpec spec = make_scenario(GestureClass::kNoHand, {32, 32}, 5);
  ScenarioSpec still = spec;
  still.kinematics.drift_vx = still.kinematics.drift_vy = 0;
  const EventStream s = generate_events(still, EsimConfig{});
  EXPECT_TRUE(s.events.empty());
}

TEST(EventGenerator, OutputIsValidAndSorted) {
  for (auto c : kAllClasses) {
    const EventStream s = generate_events(make_scenario(c, {64, 64}, 17), EsimConfig{});
    EXPECT_TRUE(validate_stream(s).ok()) << class_name(c);
  }
}

TEST(EventGenerator, NoiseFollowsRate) {
  EsimConfig esim;
  esim.noise_rate = 2.0;
  ScenarioSpec spec = make_scenario(GestureClass::kNoHand, {32, 32}, 3, 2.0);
  spec.kinematics.drift_vx = spec.kinematics.drift_vy = 0;
  const EventStream s = generate_events(spec, esim);
  const double expected = 2.0 * 32 * 32 * 2.0;
  EXPECT_NEAR(static_cast<double>(s.events.size()), expected, 5 * std::sqrt(expected));
}

TEST(Scene, RestWithoutJitterIsStatic) {
  ScenarioSpec spec = make_scenario(GestureClass::kRest, {64, 64}, 9);
  spec.kinematics.rest_jitter = 0;
  spec.kinematics.wander_amplitude = 0;
  spec.kinematics.hand_vx = spec.kinematics.hand_vy = 0;
  spec.kinematics.drift_vx = spec.kinematics.drift_vy = 0;
  EXPECT_EQ(render_scene(spec, 0.0).values, render_scene(spec, 0.5).values);
}

TEST(Scene, NoHandWithoutDriftIsConstant) {
  ScenarioSpec spec = make_scenario(GestureClass::kNoHand, {64, 64}, 9);
  spec.kinematics.drift_vx = spec.kinematics.drift_vy = 0;
  const auto first = render_scene(spec, 0.0).values;
  for (double t : {0.1, 0.37, 0.9, 1.0}) EXPECT_EQ(render_scene(spec, t).values, first);
}

TEST(Scene, SwipeThumbMovesAtConstantVelocity) {
  ScenarioSpec spec = make_scenario(GestureClass::kSwipeRight, {64, 64}, 21);
  spec.kinematics.wander_amplitude = 0;
  spec.kinematics.hand_vx = spec.kinematics.hand_vy = 0;
  spec.kinematics.rest_jitter = 0;
  const double v = spec.kinematics.swipe_speed * spec.kinematics.swipe_direction;
  EXPECT_GT(v, 0.0);
  const double x0 = hand_pose(spec, 0.0).thumb_x;
  for (double t : {0.1, 0.25, 0.5, 0.8, 1.0}) {
    EXPECT_NEAR(hand_pose(spec, t).thumb_x - x0, v * t, 1e-9);
  }
}

TEST(Scene, RenderOutsideDurationThrows) {
  const ScenarioSpec spec = make_scenario(GestureClass::kRest, {16, 16}, 1);
  EXPECT_THROW(render_scene(spec, 1.5), std::out_of_range);
}

TEST(Scene, HandBoxContainsPoseExtent) {
  for (auto c : kAllClasses) {
    const ScenarioSpec spec = make_scenario(c, {64, 64}, 40);
    const auto box = hand_box(spec, 0.0, 1.0);
    EXPECT_EQ(box.has_value(), c != GestureClass::kNoHand);
    if (box) {
      EXPECT_TRUE(box->valid());
    }
  }
}

TEST(Scene, ScenariosAreDeterministicPerSeed) {
  EXPECT_EQ(make_scenario(GestureClass::kDoublePinch, {64, 64}, 77),
            make_scenario(GestureClass::kDoublePinch, {64, 64}, 77));
  EXPECT_NE(make_scenario(GestureClass::kDoublePinch, {64, 64}, 77),
            make_scenario(GestureClass::kDoublePinch, {64, 64}, 78));
}

TEST(Classes, NamesRoundTrip) {
  for (auto c : kAllClasses) {
    EXPECT_EQ(parse_class(class_name(c)), c);
    EXPECT_EQ(parse_class(class_short_name(c)), c);
  }
  EXPECT_FALSE(parse_class("wave").has_value());
}

class DatasetTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = std::filesystem::temp_directory_path() /
            ("evg_dataset_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
             "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::remove_all(root_);
  }
  void TearDown() override { std::filesystem::remove_all(root_); }
  std::filesystem::path root_;
};

TEST_F(DatasetTest, SplitCountsPerClass) {
  const auto specs = make_scenarios({kAllClasses.begin(), kAllClasses.end()}, 10, {16, 16}, 3, 0.2);
  const auto manifest = build_dataset(specs, EsimConfig{}, 0.9, root_ / "a");
  EXPECT_EQ(manifest.split(Split::kTrain).size(), 63u);
  EXPECT_EQ(manifest.split(Split::kVal).size(), 7u);
  for (auto c : kAllClasses) {
    int train = 0, val = 0;
    for (const auto& e : manifest.entries) {
      if (e.spec.label == c) (e.split == Split::kTrain ? train : val)++;
    }
    EXPECT_EQ(train, 9);
    EXPECT_EQ(val, 1);
  }
  const auto reread = read_manifest(root_ / "a");
  ASSERT_EQ(reread.entries.size(), manifest.entries.size());
  for (std::size_t i = 0; i < reread.entries.size(); ++i) {
    EXPECT_EQ(reread.entries[i].spec, manifest.entries[i].spec);
    EXPECT_EQ(reread.entries[i].split, manifest.entries[i].split);
  }
}

TEST_F(DatasetTest, RebuildIsByteIdentical) {
  const auto specs = make_scenarios({GestureClass::kSwipeLeft, GestureClass::kDoublePinch}, 3,
                                    {16, 16}, 8, 0.3);
  const auto a = build_dataset(specs, EsimConfig{}, 0.9, root_ / "a");
  const auto b = build_dataset(specs, EsimConfig{}, 0.9, root_ / "b");
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    EXPECT_EQ(read_file_bytes(a.root / a.entries[i].path), read_file_bytes(b.root / b.entries[i].path));
  }
}

}  // namespace
}  // namespace evg
