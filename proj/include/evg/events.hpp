#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace evg {

/// Microseconds since the start of a stream.
using Timestamp = std::uint64_t;

struct SensorGeometry {
  std::uint16_t width = 320;
  std::uint16_t height = 320;

  constexpr bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width && y < height;
  }
  constexpr std::size_t pixel_count() const noexcept {
    return std::size_t{width} * height;
  }
  constexpr bool operator==(const SensorGeometry&) const = default;
};

/// One sensor event. Polarity 1 is a brightness increase, 0 a decrease.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t p = 0;
  Timestamp t = 0;

  constexpr bool operator==(const Event&) const = default;
};

struct EventStream {
  SensorGeometry geometry;
  std::vector<Event> events;

  bool operator==(const EventStream&) const = default;
};

enum class StreamRule { kOutOfBounds, kBadPolarity, kTimestampOrder, kBadGeometry };

std::string_view to_string(StreamRule rule);

struct StreamViolation {
  std::size_t index = 0;
  StreamRule rule = StreamRule::kOutOfBounds;
};

struct ValidationReport {
  std::vector<StreamViolation> violations;

  bool ok() const noexcept { return violations.empty(); }
  std::string describe(std::size_t max_items = 8) const;
};

/// Checks bounds, polarity and timestamp order. Never throws.
ValidationReport validate_stream(const EventStream& stream);

// ---------------------------------------------------------------------------
// HEV1 codec

inline constexpr std::size_t kHev1HeaderSize = 16;
inline constexpr std::size_t kHev1RecordSize = 16;
inline constexpr std::uint16_t kHev1Version = 1;

class InvalidStreamError : public std::runtime_error {
 public:
  explicit InvalidStreamError(ValidationReport report);
  const ValidationReport& report() const noexcept { return report_; }

 private:
  ValidationReport report_;
};

enum class DecodeErrorCode {
  kTruncatedHeader,
  kBadMagic,
  kUnsupportedVersion,
  kBadGeometry,
  kNonZeroReserved,
  kTruncatedRecord,
  kTrailingBytes,
  kOutOfBounds,
  kBadPolarity,
  kTimestampOrder,
};

std::string_view to_string(DecodeErrorCode code);

class DecodeError : public std::runtime_error {
 public:
  DecodeError(DecodeErrorCode code, std::string detail);
  DecodeErrorCode code() const noexcept { return code_; }

 private:
  DecodeErrorCode code_;
};

std::vector<std::uint8_t> encode_events(const EventStream& stream);
EventStream decode_events(std::span<const std::uint8_t> bytes);

void write_hev1(const std::filesystem::path& path, const EventStream& stream);
EventStream read_hev1(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace evg
