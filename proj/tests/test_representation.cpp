#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "evg/representation.hpp"
#include "test_support.hpp"

namespace evg {
namespace {

constexpr Timestamp kL = 500'000;

TEST(TimeSurface, DecayAtZeroHalfAndFullWindowAge) {
  const SensorGeometry g{8, 8};
  const Timestamp t_end = 2'000'000;
  EventStream s{g, {{1, 1, 1, t_end - kL}, {2, 2, 1, t_end - kL / 2}, {3, 3, 1, t_end}}};
  const TimeSurface ts = build_time_surface(s, t_end, kL);
  EXPECT_NEAR(ts.at(1, 3, 3), 1.0, 1e-6);
  EXPECT_NEAR(ts.at(1, 2, 2), std::exp(-0.5), 1e-6);
  EXPECT_NEAR(ts.at(1, 1, 1), std::exp(-1.0), 1e-6);
  EXPECT_NEAR(ts.at(1, 1, 1), 0.367879, 1e-6);
}

TEST(TimeSurface, EventsOutsideTheWindowAreIgnored) {
  const SensorGeometry g{4, 4};
  EventStream s{g, {{0, 0, 1, 999}, {1, 0, 0, 1'000}, {2, 0, 1, 1'501}}};
  const TimeSurface ts = build_time_surface(s, 1'500, 500);
  EXPECT_EQ(ts.at(1, 0, 0), 0.0F);
  EXPECT_NEAR(ts.at(0, 0, 1), std::exp(-1.0), 1e-6);
  EXPECT_EQ(ts.at(1, 0, 2), 0.0F);
}

TEST(TimeSurface, NewestEventOverwritesOlder) {
  const SensorGeometry g{4, 4};
  EventStream s{g, {{1, 2, 1, 1'000'000 - kL / 2}, {1, 2, 1, 1'000'000}}};
  const TimeSurface ts = build_time_surface(s, 1'000'000, kL);
  EXPECT_EQ(ts.at(1, 2, 1), 1.0F);
}

TEST(TimeSurface, EmptyStreamGivesZeros) {
  const TimeSurface ts = build_time_surface(EventStream{{16, 16}, {}}, 1'000'000, kL);
  for (float v : ts.values) EXPECT_EQ(v, 0.0F);
}

// Brute-force oracle: per pixel and polarity, the newest event in the window.
TEST(TimeSurface, MatchesBruteForceOracleOnGeneratedStreams) {
  detail::Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const SensorGeometry g{static_cast<std::uint16_t>(1 + rng.below(12)),
                           static_cast<std::uint16_t>(1 + rng.below(12))};
    const Timestamp length = 1 + rng.below(400'000);
    const EventStream s = test::random_stream(rng, g, rng.below(300), 1'000'000);
    const Timestamp t_end = rng.below(1'200'000);
    const TimeSurface ts = build_time_surface(s, t_end, length);

    std::map<std::tuple<int, int, int>, Timestamp> newest;
    for (const Event& e : s.events) {
      if (e.t > t_end || e.t + length < t_end) continue;
      auto& slot = newest[{e.p, e.y, e.x}];
      slot = std::max(slot, e.t);
    }
    for (int c = 0; c < 2; ++c) {
      for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) {
          const auto it = newest.find({c, y, x});
          const double expected =
              it == newest.end() ? 0.0
                                 : std::exp(-static_cast<double>(t_end - it->second) / length);
          ASSERT_NEAR(ts.at(c, y, x), expected, 1e-6) << "trial " << trial;
        }
      }
    }
  }
}

TEST(TimeSurface, PolarityChannelsAreIndependent) {
  detail::Rng rng(8);
  for (int trial = 0; trial < 1000; ++trial) {
    const SensorGeometry g{10, 10};
    const EventStream s = test::random_stream(rng, g, 200, 600'000);
    EventStream pos{g, {}}, neg{g, {}};
    for (const Event& e : s.events) (e.p ? pos : neg).events.push_back(e);
    const TimeSurface all = build_time_surface(s, 600'000, kL);
    const TimeSurface only_pos = build_time_surface(pos, 600'000, kL);
    const TimeSurface only_neg = build_time_surface(neg, 600'000, kL);
    const std::size_t n = g.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_EQ(all.values[i], only_neg.values[i]);
      ASSERT_EQ(all.values[n + i], only_pos.values[n + i]);
      ASSERT_EQ(only_pos.values[i], 0.0F);
      ASSERT_EQ(only_neg.values[n + i], 0.0F);
    }
  }
}

TEST(TimeSurface, SpanOverloadMatchesStreamOverload) {
  detail::Rng rng(9);
  const EventStream s = test::random_stream(rng, {16, 16}, 500, 2'000'000);
  EXPECT_EQ(build_time_surface(s, 1'234'567, kL),
            build_time_surface(std::span<const Event>(s.events), s.geometry, 1'234'567, kL));
}

TEST(Slide, WindowEndsAreStrideMultiples) {
  const AggregatorConfig cfg{kL, 80'000};
  const auto ends = slide_window_ends(cfg, 1'000'000, 1'400'000);
  EXPECT_EQ(ends, (std::vector<Timestamp>{1'080'000, 1'160'000, 1'240'000, 1'320'000, 1'400'000}));
}

TEST(Slide, EverySurfaceMatchesAnIndependentBuild) {
  detail::Rng rng(10);
  const EventStream s = test::random_stream(rng, {20, 20}, 3000, 3'000'000);
  const AggregatorConfig cfg{kL, 80'000};
  const auto surfaces = slide(s, cfg, 0, 3'000'000);
  const auto ends = slide_window_ends(cfg, 0, 3'000'000);
  ASSERT_EQ(surfaces.size(), ends.size());
  for (std::size_t i = 0; i < ends.size(); ++i) {
    EXPECT_EQ(surfaces[i].window_end, ends[i]);
    EXPECT_EQ(surfaces[i], build_time_surface(s, ends[i], kL));
  }
}

TEST(Slide, EmptyStreamGivesZeroSurfaces) {
  const auto surfaces = slide(EventStream{{8, 8}, {}}, {kL, 80'000}, 0, 400'000);
  ASSERT_EQ(surfaces.size(), 5u);
  for (const auto& s : surfaces) {
    for (float v : s.values) EXPECT_EQ(v, 0.0F);
  }
}

TEST(Crop, FullFrameBoxIsIdentity) {
  detail::Rng rng(12);
  const TimeSurface s = test::random_surface(rng, {32, 32});
  const Crop c = crop_resize(s, {0.5, 0.5, 1.0, 1.0}, 32);
  EXPECT_FALSE(c.degenerate);
  EXPECT_EQ(c.patch.values, s.values);
}

TEST(Crop, ZeroSurfaceGivesZeroPatch) {
  const TimeSurface s({32, 32}, 1, 1);
  const Crop c = crop_resize(s, {0.3, 0.6, 0.4, 0.2}, 16);
  for (float v : c.patch.values) EXPECT_EQ(v, 0.0F);
}

TEST(Crop, HalfFrameBoxMatchesNearestNeighborOracle) {
  const SensorGeometry g{32, 32};
  TimeSurface s(g, 1, 1);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) s.at(c, y, x) = ((x + y + c) % 2) ? 1.0F : 0.25F;
    }
  }
  // Left half of the frame, resampled to 24x24.
  const int out = 24;
  const Crop crop = crop_resize(s, {0.25, 0.5, 0.5, 1.0}, out);
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < out; ++y) {
      for (int x = 0; x < out; ++x) {
        // Output pixel center mapped back into the 16x32 source rectangle.
        const double fx = (x + 0.5) * 16.0 / out;
        const double fy = (y + 0.5) * 32.0 / out;
        const int sx = static_cast<int>(std::floor(fx));
        const int sy = static_cast<int>(std::floor(fy));
        ASSERT_EQ(crop.patch.at(c, y, x), s.at(c, sy, sx)) << x << "," << y;
      }
    }
  }
}

TEST(Crop, EmptyBoxIsDegenerate) {
  const TimeSurface s({16, 16}, 1, 1);
  EXPECT_TRUE(crop_resize(s, {0.5, 0.5, 0.0, 0.3}, 8).degenerate);
}

}  // namespace
}  // namespace evg
