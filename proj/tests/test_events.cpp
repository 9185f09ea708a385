#include <gtest/gtest.h>

#include <cstring>

#include "evg/detail/rng.hpp"
#include "evg/events.hpp"
#include "test_support.hpp"

namespace evg {
namespace {

TEST(StreamValidation, EmptyStreamIsValid) {
  EXPECT_TRUE(validate_stream(EventStream{}).ok());
}

TEST(StreamValidation, DecreasingTimestampIsFlaggedAtSecondIndex) {
  EventStream s{{320, 320}, {{1, 1, 1, 5}, {2, 2, 0, 3}}};
  const auto report = validate_stream(s);
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].index, 1u);
  EXPECT_EQ(report.violations[0].rule, StreamRule::kTimestampOrder);
}

TEST(StreamValidation, OutOfBoundsAndPolarity) {
  EventStream s{{4, 4}, {{4, 0, 1, 1}, {0, 0, 2, 2}}};
  const auto report = validate_stream(s);
  ASSERT_EQ(report.violations.size(), 2u);
  EXPECT_EQ(report.violations[0].rule, StreamRule::kOutOfBounds);
  EXPECT_EQ(report.violations[1].rule, StreamRule::kBadPolarity);
}

TEST(StreamValidation, GeneratedSortedStreamsAreValid) {
  detail::Rng rng(11);
  const EventStream s = test::random_stream(rng, {320, 320}, 10'000, 5'000'000);
  EXPECT_TRUE(validate_stream(s).ok());
}

TEST(Hev1, EmptyStreamIsHeaderOnly) {
  const auto bytes = encode_events(EventStream{{320, 320}, {}});
  ASSERT_EQ(bytes.size(), kHev1HeaderSize);
  EXPECT_EQ(std::memcmp(bytes.data(), "HEV1", 4), 0);
  EXPECT_EQ(decode_events(bytes), (EventStream{{320, 320}, {}}));
}

TEST(Hev1, SingleRecordLayout) {
  const auto bytes = encode_events(EventStream{{320, 320}, {{3, 4, 1, 100}}});
  ASSERT_EQ(bytes.size(), kHev1HeaderSize + kHev1RecordSize);
  const std::uint8_t* r = bytes.data() + kHev1HeaderSize;
  // u64 t, u16 x, u16 y, u8 p, 3 reserved bytes, all little-endian.
  const std::uint8_t expected[16] = {100, 0, 0, 0, 0, 0, 0, 0, 3, 0, 4, 0, 1, 0, 0, 0};
  EXPECT_EQ(std::memcmp(r, expected, 16), 0);
  const auto decoded = decode_events(bytes);
  ASSERT_EQ(decoded.events.size(), 1u);
  EXPECT_EQ(decoded.events[0], (Event{3, 4, 1, 100}));
}

TEST(Hev1, HeaderFields) {
  const auto bytes = encode_events(EventStream{{640, 480}, {{0, 0, 0, 1}, {1, 1, 1, 2}}});
  auto u16 = [&](std::size_t at) { return bytes[at] | (bytes[at + 1] << 8); };
  EXPECT_EQ(u16(4), 1);  // version
  EXPECT_EQ(u16(6), 640);
  EXPECT_EQ(u16(8), 480);
  EXPECT_EQ(bytes[12], 2);
}

TEST(Hev1, RoundTripIsBitExactOnRandomStreams) {
  detail::Rng rng(2024);
  for (int i = 0; i < 100; ++i) {
    const SensorGeometry g{static_cast<std::uint16_t>(1 + rng.below(640)),
                           static_cast<std::uint16_t>(1 + rng.below(480))};
    const EventStream s = test::random_stream(rng, g, rng.below(2000), 1ULL << 40);
    const auto bytes = encode_events(s);
    ASSERT_EQ(decode_events(bytes), s);
    ASSERT_EQ(encode_events(decode_events(bytes)), bytes);
  }
}

TEST(Hev1, WrongMagicIsReported) {
  auto bytes = encode_events(EventStream{{8, 8}, {{1, 1, 1, 1}}});
  bytes[0] = 'X';
  try {
    decode_events(bytes);
    FAIL() << "expected DecodeError";
  } catch (const DecodeError& e) {
    EXPECT_EQ(e.code(), DecodeErrorCode::kBadMagic);
  }
}

TEST(Hev1, TruncationIsReported) {
  const auto bytes = encode_events(EventStream{{8, 8}, {{1, 1, 1, 1}, {2, 2, 0, 2}}});
  for (std::size_t n = 0; n < bytes.size(); ++n) {
    EXPECT_THROW(decode_events(std::span(bytes.data(), n)), DecodeError) << n;
  }
}

TEST(Hev1, EncodeRejectsInvalidStreams) {
  EXPECT_THROW(encode_events(EventStream{{8, 8}, {{9, 0, 1, 1}}}), InvalidStreamError);
}

TEST(Hev1, FuzzedInputsDecodeOrFailWithNamedError) {
  detail::Rng rng(99);
  const auto valid = encode_events(test::random_stream(rng, {32, 32}, 50, 100'000));
  for (int i = 0; i < 5000; ++i) {
    std::vector<std::uint8_t> bytes;
    if (i % 2 == 0) {
      bytes = valid;
      const auto flips = 1 + rng.below(8);
      for (std::uint64_t k = 0; k < flips; ++k) bytes[rng.below(bytes.size())] = rng.below(256);
      if (rng.bernoulli(0.3)) bytes.resize(rng.below(bytes.size() + 1));
    } else {
      bytes.resize(rng.below(200));
      for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
      if (bytes.size() >= 4 && rng.bernoulli(0.5)) std::memcpy(bytes.data(), "HEV1", 4);
    }
    try {
      const EventStream s = decode_events(bytes);
      EXPECT_TRUE(validate_stream(s).ok());
    } catch (const DecodeError& e) {
      EXPECT_FALSE(to_string(e.code()).empty());
    }
  }
}

}  // namespace
}  // namespace evg
