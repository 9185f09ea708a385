#include "evg/representation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace evg {

bool BoundingBox::valid() const noexcept {
  auto in01 = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  return in01(cx) && in01(cy) && in01(w) && in01(h) && w > 0.0 && h > 0.0;
}

TimeSurface build_time_surface(const EventStream& events, Timestamp t_end, Timestamp length) {
  return build_time_surface(std::span<const Event>(events.events), events.geometry, t_end, length);
}

TimeSurface build_time_surface(std::span<const Event> ev, SensorGeometry geometry, Timestamp t_end,
                               Timestamp length) {
  TimeSurface surface(geometry, t_end, length);
  const Timestamp t_begin = t_end >= length ? t_end - length : 0;
  auto first = std::lower_bound(ev.begin(), ev.end(), t_begin,
                                [](const Event& e, Timestamp t) { return e.t < t; });
  const double inv_length = 1.0 / static_cast<double>(length);
  for (auto it = first; it != ev.end() && it->t <= t_end; ++it) {
    const double age = static_cast<double>(t_end - it->t);
    surface.at(it->p, it->y, it->x) = static_cast<float>(std::exp(-age * inv_length));
  }
  return surface;
}

std::vector<Timestamp> slide_window_ends(const AggregatorConfig& config, Timestamp start,
                                         Timestamp end) {
  std::vector<Timestamp> ends;
  if (config.stride == 0) return ends;
  for (Timestamp t = start + config.stride; t <= end; t += config.stride) ends.push_back(t);
  return ends;
}

std::vector<TimeSurface> slide(const EventStream& events, const AggregatorConfig& config,
                               Timestamp start, Timestamp end) {
  std::vector<TimeSurface> out;
  for (Timestamp t : slide_window_ends(config, start, end)) {
    out.push_back(build_time_surface(events, t, config.window_length));
  }
  return out;
}

PixelRect realize_box(const BoundingBox& box, SensorGeometry geometry) {
  const double w = geometry.width;
  const double h = geometry.height;
  auto clampi = [](double v, int hi) {
    return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(hi)));
  };
  PixelRect r;
  r.x0 = clampi((box.cx - box.w / 2) * w, geometry.width);
  r.x1 = clampi((box.cx + box.w / 2) * w, geometry.width);
  r.y0 = clampi((box.cy - box.h / 2) * h, geometry.height);
  r.y1 = clampi((box.cy + box.h / 2) * h, geometry.height);
  return r;
}

Crop crop_resize(const TimeSurface& surface, const BoundingBox& box, int out_size) {
  const auto side = static_cast<std::uint16_t>(out_size);
  Crop crop{TimeSurface({side, side}, surface.window_end, surface.window_length), false};
  const PixelRect r = realize_box(box, surface.geometry);
  if (r.empty() || out_size <= 0) {
    crop.degenerate = true;
    return crop;
  }
  const int rw = r.x1 - r.x0;
  const int rh = r.y1 - r.y0;
  // Nearest source pixel for each output pixel center; integer arithmetic
  // keeps the mapping exact: floor((i + 0.5) * extent / out_size).
  std::vector<int> sx(out_size), sy(out_size);
  for (int i = 0; i < out_size; ++i) {
    sx[i] = r.x0 + static_cast<int>((2LL * i + 1) * rw / (2LL * out_size));
    sy[i] = r.y0 + static_cast<int>((2LL * i + 1) * rh / (2LL * out_size));
  }
  for (int c = 0; c < TimeSurface::kChannels; ++c) {
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        crop.patch.at(c, y, x) = surface.at(c, sy[y], sx[x]);
      }
    }
  }
  return crop;
}

void write_pgm_pair(const TimeSurface& surface, const std::filesystem::path& prefix) {
  const char* suffix[2] = {"_neg.pgm", "_pos.pgm"};
  for (int c = 0; c < TimeSurface::kChannels; ++c) {
    std::filesystem::path path = prefix;
    path += suffix[c];
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "P5\n" << surface.geometry.width << ' ' << surface.geometry.height << "\n255\n";
    for (int y = 0; y < surface.geometry.height; ++y) {
      for (int x = 0; x < surface.geometry.width; ++x) {
        const float v = std::clamp(surface.at(c, y, x), 0.0F, 1.0F);
        out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0F))));
      }
    }
  }
}

}  // namespace evg
