#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "evg/events.hpp"

namespace evg {

/// Two-channel exponential time surface over the window [t_L - L, t_L].
///
/// Values are stored channel-major (CHW). Channel 0 holds negative-polarity
/// events, channel 1 positive. A pixel is 0 when no event of that polarity
/// fell in the window, otherwise exp(-(t_L - t_i) / L) for its newest event.
struct TimeSurface {
  SensorGeometry geometry;
  Timestamp window_end = 0;
  Timestamp window_length = 0;
  std::vector<float> values;

  static constexpr int kChannels = 2;

  TimeSurface() = default;
  TimeSurface(SensorGeometry g, Timestamp t_end, Timestamp length)
      : geometry(g), window_end(t_end), window_length(length),
        values(kChannels * g.pixel_count(), 0.0F) {}

  float& at(int channel, int y, int x) {
    return values[(static_cast<std::size_t>(channel) * geometry.height + y) * geometry.width + x];
  }
  float at(int channel, int y, int x) const {
    return values[(static_cast<std::size_t>(channel) * geometry.height + y) * geometry.width + x];
  }
  bool operator==(const TimeSurface&) const = default;
};

struct AggregatorConfig {
  Timestamp window_length = 500'000;
  Timestamp stride = 80'000;

  bool valid() const noexcept { return window_length > 0 && stride > 0 && stride <= window_length; }
};

/// Normalized center/extent box; all fields in [0, 1].
struct BoundingBox {
  double cx = 0.5;
  double cy = 0.5;
  double w = 1.0;
  double h = 1.0;

  bool valid() const noexcept;
  bool operator==(const BoundingBox&) const = default;
};

TimeSurface build_time_surface(const EventStream& events, Timestamp t_end, Timestamp length);
/// Same, over a time-sorted, in-bounds event range.
TimeSurface build_time_surface(std::span<const Event> events, SensorGeometry geometry,
                               Timestamp t_end, Timestamp length);

/// Surfaces at t_L = start + k * stride for k >= 1 while t_L <= end.
std::vector<TimeSurface> slide(const EventStream& events, const AggregatorConfig& config,
                               Timestamp start, Timestamp end);

/// Window-end timestamps produced by slide() for the same arguments.
std::vector<Timestamp> slide_window_ends(const AggregatorConfig& config, Timestamp start,
                                         Timestamp end);

/// Integer pixel rectangle [x0, x1) x [y0, y1) realized from a normalized box.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
};

PixelRect realize_box(const BoundingBox& box, SensorGeometry geometry);

struct Crop {
  TimeSurface patch;  // out_size x out_size, same window metadata as the source
  bool degenerate = false;
};

Crop crop_resize(const TimeSurface& surface, const BoundingBox& box, int out_size);

/// Writes <prefix>_neg.pgm and <prefix>_pos.pgm (8-bit, value * 255). Lossy.
void write_pgm_pair(const TimeSurface& surface, const std::filesystem::path& prefix);

}  // namespace evg
