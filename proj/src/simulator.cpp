#include "evg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>

#include "json.hpp"

namespace evg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

// Closed-thumb fraction in [0, 1] for a cyclic pinch.
double pinch_closure(const Kinematics& k, double duration, double t) {
  if (k.pinch_cycles <= 0 || k.pinch_distance <= 0.0) return 0.0;
  const double period = duration / k.pinch_cycles;
  const double hold = std::min(k.pinch_hold, 0.8 * period);
  const double ramp = 0.4 * (period - hold);
  double u = std::fmod(t, period);
  if (t >= duration) u = period;  // last instant belongs to the final cycle
  if (u < ramp) return smoothstep(u / ramp);
  if (u < ramp + hold) return 1.0;
  if (u < 2.0 * ramp + hold) return 1.0 - smoothstep((u - ramp - hold) / ramp);
  return 0.0;
}

}  // namespace

std::string_view class_name(GestureClass c) {
  switch (c) {
    case GestureClass::kNoHand: return "no_hand";
    case GestureClass::kHandUnknown: return "hand_unknown";
    case GestureClass::kSwipeLeft: return "swipe_left";
    case GestureClass::kSwipeRight: return "swipe_right";
    case GestureClass::kRest: return "rest";
    case GestureClass::kDoublePinch: return "double_pinch";
    case GestureClass::kMovingPinch: return "moving_pinch";
  }
  return "unknown";
}

std::string_view class_short_name(GestureClass c) {
  static constexpr std::array<std::string_view, kNumClasses> kShort = {"nh", "hu", "sl", "sr",
                                                                        "r",  "dp", "mp"};
  return kShort[index_of(c)];
}

std::optional<GestureClass> parse_class(std::string_view name) {
  for (GestureClass c : kAllClasses) {
    if (name == class_name(c) || name == class_short_name(c)) return c;
  }
  return std::nullopt;
}

bool ScenarioSpec::valid() const noexcept {
  if (!(duration > 0.0) || !std::isfinite(duration)) return false;
  if (geometry.width == 0 || geometry.height == 0) return false;
  const Kinematics& k = kinematics;
  for (double m : {k.palm_rx, k.palm_ry, k.thumb_r, k.swipe_speed, k.pinch_distance, k.pinch_hold,
                   k.rest_jitter, k.jitter_freq, k.wander_amplitude, k.wander_fx, k.wander_fy}) {
    if (!std::isfinite(m) || m < 0.0) return false;
  }
  for (double v : {k.palm_x, k.palm_y, k.thumb_dx, k.thumb_dy, k.hand_vx, k.hand_vy, k.drift_vx,
                   k.drift_vy, k.wander_phase_x, k.wander_phase_y}) {
    if (!std::isfinite(v)) return false;
  }
  return k.pinch_cycles >= 0 && (k.swipe_direction == 1 || k.swipe_direction == -1);
}

bool EsimConfig::valid() const noexcept {
  return contrast_threshold_pos > 0 && contrast_threshold_neg > 0 && sample_rate > 0 &&
         std::isfinite(sample_rate) && noise_rate >= 0;
}

ScenarioSpec make_scenario(GestureClass label, SensorGeometry geometry, std::uint64_t seed,
                           double duration) {
  ScenarioSpec spec;
  spec.label = label;
  spec.duration = duration;
  spec.geometry = geometry;
  spec.seed = seed;

  detail::Rng rng(detail::hash_combine(seed, static_cast<std::uint64_t>(index_of(label)) + 17));
  const double s = std::min(geometry.width, geometry.height) / 64.0;
  Kinematics& k = spec.kinematics;
  k.palm_rx = rng.uniform(8.0, 11.0) * s;
  k.palm_ry = rng.uniform(10.0, 13.0) * s;
  k.thumb_r = rng.uniform(3.0, 4.0) * s;
  k.palm_x = rng.uniform(0.38, 0.62) * geometry.width;
  k.palm_y = rng.uniform(0.38, 0.62) * geometry.height;
  k.thumb_dx = rng.uniform(-0.2, 0.2) * k.palm_rx;
  k.thumb_dy = rng.uniform(0.2, 0.45) * k.palm_ry;

  auto random_velocity = [&](double lo, double hi, double& vx, double& vy) {
    const double speed = rng.uniform(lo, hi) * s;
    const double angle = rng.uniform(0.0, kTwoPi);
    vx = speed * std::cos(angle);
    vy = speed * std::sin(angle);
  };

  switch (label) {
    case GestureClass::kNoHand:
      if (rng.bernoulli(0.5)) random_velocity(4.0, 12.0, k.drift_vx, k.drift_vy);
      break;
    case GestureClass::kHandUnknown:
      k.wander_amplitude = rng.uniform(4.0, 8.0) * s;
      k.wander_fx = rng.uniform(0.6, 1.4);
      k.wander_fy = rng.uniform(0.6, 1.4);
      k.wander_phase_x = rng.uniform(0.0, kTwoPi);
      k.wander_phase_y = rng.uniform(0.0, kTwoPi);
      break;
    case GestureClass::kSwipeLeft:
    case GestureClass::kSwipeRight:
      k.swipe_speed = rng.uniform(16.0, 26.0) * s / duration;
      k.swipe_direction = label == GestureClass::kSwipeRight ? 1 : -1;
      break;
    case GestureClass::kRest:
      k.rest_jitter = rng.uniform(0.6, 1.5) * s;
      k.jitter_freq = rng.uniform(3.0, 6.0);
      break;
    case GestureClass::kDoublePinch:
      k.pinch_distance = rng.uniform(5.0, 8.0) * s;
      k.pinch_cycles = 2;
      k.pinch_hold = rng.uniform(0.05, 0.15) * duration;
      break;
    case GestureClass::kMovingPinch:
      k.pinch_distance = rng.uniform(5.0, 8.0) * s;
      k.pinch_cycles = 1;
      k.pinch_hold = rng.uniform(0.6, 0.75) * duration;
      random_velocity(10.0, 18.0, k.hand_vx, k.hand_vy);
      break;
  }
  return spec;
}

std::vector<ScenarioSpec> make_scenarios(const std::vector<GestureClass>& classes, int per_class,
                                         SensorGeometry geometry, std::uint64_t seed,
                                         double duration) {
  std::vector<ScenarioSpec> specs;
  for (GestureClass c : classes) {
    for (int j = 0; j < per_class; ++j) {
      const std::uint64_t sample_seed = detail::hash_combine(
          detail::hash_combine(seed, static_cast<std::uint64_t>(index_of(c))),
          static_cast<std::uint64_t>(j));
      specs.push_back(make_scenario(c, geometry, sample_seed, duration));
    }
  }
  return specs;
}

HandPose hand_pose(const ScenarioSpec& spec, double t) {
  HandPose pose;
  if (spec.label == GestureClass::kNoHand) return pose;
  const Kinematics& k = spec.kinematics;
  pose.visible = true;
  pose.palm_rx = k.palm_rx;
  pose.palm_ry = k.palm_ry;
  pose.thumb_r = k.thumb_r;

  double px = k.palm_x + k.hand_vx * t;
  double py = k.palm_y + k.hand_vy * t;
  if (k.wander_amplitude > 0) {
    px += k.wander_amplitude *
          (std::sin(kTwoPi * k.wander_fx * t + k.wander_phase_x) - std::sin(k.wander_phase_x));
    py += k.wander_amplitude *
          (std::sin(kTwoPi * k.wander_fy * t + k.wander_phase_y) - std::sin(k.wander_phase_y));
  }
  if (k.rest_jitter > 0) {
    px += k.rest_jitter * std::sin(kTwoPi * k.jitter_freq * t);
    py += k.rest_jitter * std::sin(kTwoPi * k.jitter_freq * 1.3 * t + 1.0) -
          k.rest_jitter * std::sin(1.0);
  }
  pose.palm_x = px;
  pose.palm_y = py;

  pose.thumb_x = px + k.thumb_dx;
  pose.thumb_y = py + k.thumb_dy;
  if (k.swipe_speed > 0) {
    pose.thumb_x += k.swipe_direction * k.swipe_speed * (t - 0.5 * spec.duration);
  }
  pose.thumb_y -= k.pinch_distance * pinch_closure(k, spec.duration, t);
  return pose;
}

std::optional<BoundingBox> hand_box(const ScenarioSpec& spec, double t0, double t1) {
  if (spec.label == GestureClass::kNoHand) return std::nullopt;
  t0 = std::clamp(t0, 0.0, spec.duration);
  t1 = std::clamp(t1, t0, spec.duration);
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  constexpr int kSamples = 32;
  for (int i = 0; i <= kSamples; ++i) {
    const double t = t0 + (t1 - t0) * i / kSamples;
    const HandPose p = hand_pose(spec, t);
    x0 = std::min({x0, p.palm_x - p.palm_rx, p.thumb_x - p.thumb_r});
    x1 = std::max({x1, p.palm_x + p.palm_rx, p.thumb_x + p.thumb_r});
    y0 = std::min({y0, p.palm_y - p.palm_ry, p.thumb_y - p.thumb_r});
    y1 = std::max({y1, p.palm_y + p.palm_ry, p.thumb_y + p.thumb_r});
  }
  const double w = spec.geometry.width;
  const double h = spec.geometry.height;
  x0 = std::clamp(x0, 0.0, w);
  x1 = std::clamp(x1, 0.0, w);
  y0 = std::clamp(y0, 0.0, h);
  y1 = std::clamp(y1, 0.0, h);
  BoundingBox box;
  box.w = std::max((x1 - x0) / w, 1.0 / w);
  box.h = std::max((y1 - y0) / h, 1.0 / h);
  box.cx = std::clamp((x0 + x1) / (2 * w), 0.0, 1.0);
  box.cy = std::clamp((y0 + y1) / (2 * h), 0.0, 1.0);
  return box;
}

void draw_hand(const HandPose& pose, SensorGeometry geometry, std::vector<double>& values) {
  if (!pose.visible) return;
  const double margin = 2.0 * kEdgeWidth;
  const int x_lo = std::max(0, static_cast<int>(std::floor(
                                   std::min(pose.palm_x - pose.palm_rx, pose.thumb_x - pose.thumb_r) - margin)));
  const int x_hi = std::min<int>(geometry.width - 1, static_cast<int>(std::ceil(std::max(
                                   pose.palm_x + pose.palm_rx, pose.thumb_x + pose.thumb_r) + margin)));
  const int y_lo = std::max(0, static_cast<int>(std::floor(
                                   std::min(pose.palm_y - pose.palm_ry, pose.thumb_y - pose.thumb_r) - margin)));
  const int y_hi = std::min<int>(geometry.height - 1, static_cast<int>(std::ceil(std::max(
                                   pose.palm_y + pose.palm_ry, pose.thumb_y + pose.thumb_r) + margin)));
  const double palm_scale = std::sqrt(pose.palm_rx * pose.palm_ry);
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double fx = x + 0.5;
      const double fy = y + 0.5;
      double& v = values[static_cast<std::size_t>(y) * geometry.width + x];
      const double ex = (fx - pose.palm_x) / pose.palm_rx;
      const double ey = (fy - pose.palm_y) / pose.palm_ry;
      const double palm_d = (std::sqrt(ex * ex + ey * ey) - 1.0) * palm_scale;
      const double palm_m = std::clamp(0.5 - palm_d / kEdgeWidth, 0.0, 1.0);
      v = v * (1.0 - palm_m) + kPalmLevel * palm_m;
      const double thumb_d = std::hypot(fx - pose.thumb_x, fy - pose.thumb_y) - pose.thumb_r;
      const double thumb_m = std::clamp(0.5 - thumb_d / kEdgeWidth, 0.0, 1.0);
      v = v * (1.0 - thumb_m) + kThumbLevel * thumb_m;
    }
  }
}

SceneRenderer::SceneRenderer(ScenarioSpec spec) : spec_(std::move(spec)) {
  const SensorGeometry g = spec_.geometry;
  const double s = std::min(g.width, g.height) / 64.0;
  detail::Rng rng(detail::hash_combine(spec_.seed, 0xBAC4u));
  std::array<double, kWaves> phase{};
  for (int i = 0; i < kWaves; ++i) {
    const double wavelength = rng.uniform(6.0, 20.0) * s;
    const double angle = rng.uniform(0.0, kTwoPi);
    kx_[i] = kTwoPi / wavelength * std::cos(angle);
    ky_[i] = kTwoPi / wavelength * std::sin(angle);
    amp_[i] = rng.uniform(0.08, 0.16);
    phase[i] = rng.uniform(0.0, kTwoPi);
  }
  const std::size_t n = g.pixel_count();
  sin_.resize(kWaves * n);
  cos_.resize(kWaves * n);
  static_background_.assign(n, 0.0);
  for (int i = 0; i < kWaves; ++i) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * g.width + x;
        const double a = kx_[i] * (x + 0.5) + ky_[i] * (y + 0.5) + phase[i];
        sin_[i * n + p] = std::sin(a);
        cos_[i * n + p] = std::cos(a);
        static_background_[p] += amp_[i] * sin_[i * n + p];
      }
    }
  }
}

LogFrame SceneRenderer::render(double t) const {
  if (!(t >= 0.0 && t <= spec_.duration)) {
    throw std::out_of_range("render time " + std::to_string(t) + " outside [0, " +
                            std::to_string(spec_.duration) + "]");
  }
  const SensorGeometry g = spec_.geometry;
  LogFrame frame{g, {}, seconds_to_us(t)};
  const Kinematics& k = spec_.kinematics;
  const double dx = k.drift_vx * t;
  const double dy = k.drift_vy * t;
  if (dx == 0.0 && dy == 0.0) {
    frame.values = static_background_;
  } else {
    // sin(a - c) = sin a cos c - cos a sin c, with c the drift phase shift.
    const std::size_t n = g.pixel_count();
    frame.values.assign(n, 0.0);
    for (int i = 0; i < kWaves; ++i) {
      const double c = kx_[i] * dx + ky_[i] * dy;
      const double cc = amp_[i] * std::cos(c);
      const double sc = amp_[i] * std::sin(c);
      const double* sn = &sin_[i * n];
      const double* cs = &cos_[i * n];
      for (std::size_t p = 0; p < n; ++p) frame.values[p] += sn[p] * cc - cs[p] * sc;
    }
  }
  draw_hand(hand_pose(spec_, t), g, frame.values);
  return frame;
}

LogFrame render_scene(const ScenarioSpec& spec, double t) { return SceneRenderer(spec).render(t); }

EventGenerator::EventGenerator(SensorGeometry geometry, EsimConfig config, std::uint64_t noise_seed)
    : geometry_(geometry), config_(config), noise_(detail::hash_combine(noise_seed, 0x4015E)) {
  if (!config_.valid()) throw std::invalid_argument("invalid EsimConfig");
}

void EventGenerator::reset(const LogFrame& frame) {
  if (frame.geometry != geometry_ || frame.values.size() != geometry_.pixel_count()) {
    throw std::invalid_argument("frame geometry mismatch");
  }
  reference_ = frame.values;
  previous_ = frame.values;
  last_fire_.assign(geometry_.pixel_count(), -1);
  previous_t_ = frame.timestamp;
  initialized_ = true;
}

void EventGenerator::add_frame(const LogFrame& frame, std::vector<Event>& out) {
  if (!initialized_) {
    reset(frame);
    return;
  }
  if (frame.geometry != geometry_ || frame.values.size() != geometry_.pixel_count()) {
    throw std::invalid_argument("frame geometry mismatch");
  }
  if (frame.timestamp < previous_t_) throw std::invalid_argument("frames must be time-ordered");

  const double t0 = static_cast<double>(previous_t_);
  const double span = static_cast<double>(frame.timestamp - previous_t_);
  const double cp = config_.contrast_threshold_pos;
  const double cn = config_.contrast_threshold_neg;
  const auto refractory = static_cast<std::int64_t>(config_.refractory_period);
  pending_.clear();

  auto emit = [&](std::size_t i, double v0, double v1, double level, std::uint8_t p) {
    const double frac = std::clamp((level - v0) / (v1 - v0), 0.0, 1.0);
    auto t = static_cast<Timestamp>(std::llround(t0 + frac * span));
    t = std::clamp(t, previous_t_, frame.timestamp);
    if (refractory > 0 && last_fire_[i] >= 0 &&
        static_cast<std::int64_t>(t) - last_fire_[i] < refractory) {
      return;
    }
    last_fire_[i] = static_cast<std::int64_t>(t);
    pending_.push_back({static_cast<std::uint16_t>(i % geometry_.width),
                        static_cast<std::uint16_t>(i / geometry_.width), p, t});
  };

  const std::size_t n = geometry_.pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const double v0 = previous_[i];
    const double v1 = frame.values[i];
    double& ref = reference_[i];
    if (v1 > v0) {
      while (ref + cp <= v1) {
        ref += cp;
        emit(i, v0, v1, ref, 1);
      }
    } else if (v1 < v0) {
      while (ref - cn >= v1) {
        ref -= cn;
        emit(i, v0, v1, ref, 0);
      }
    }
    previous_[i] = v1;
  }

  if (config_.noise_rate > 0 && span > 0) {
    const double mean = config_.noise_rate * static_cast<double>(n) * span * 1e-6;
    const std::uint64_t count = noise_.poisson(mean);
    for (std::uint64_t j = 0; j < count; ++j) {
      const auto pix = noise_.below(n);
      const auto t = previous_t_ + 1 +
                     noise_.below(frame.timestamp - previous_t_);  // (t0, t1]
      pending_.push_back({static_cast<std::uint16_t>(pix % geometry_.width),
                          static_cast<std::uint16_t>(pix / geometry_.width),
                          static_cast<std::uint8_t>(noise_.below(2)), t});
    }
  }

  // Ties keep generation order.
  std::stable_sort(pending_.begin(), pending_.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  out.insert(out.end(), pending_.begin(), pending_.end());
  previous_t_ = frame.timestamp;
}

std::vector<double> sample_times(double duration, double sample_rate) {
  std::vector<double> times;
  const auto steps = static_cast<long>(std::ceil(duration * sample_rate - 1e-9));
  times.reserve(static_cast<std::size_t>(steps) + 1);
  for (long k = 0; k < steps; ++k) times.push_back(static_cast<double>(k) / sample_rate);
  times.push_back(duration);
  return times;
}

EventStream generate_events(SensorGeometry geometry, const EsimConfig& config, double duration,
                            const FrameSource& frame_at, std::uint64_t noise_seed) {
  EventStream stream{geometry, {}};
  EventGenerator gen(geometry, config, noise_seed);
  for (double t : sample_times(duration, config.sample_rate)) {
    gen.add_frame(frame_at(t), stream.events);
  }
  return stream;
}

EventStream generate_events(const ScenarioSpec& spec, const EsimConfig& config) {
  if (!spec.valid()) throw std::invalid_argument("invalid ScenarioSpec");
  SceneRenderer renderer(spec);
  return generate_events(spec.geometry, config, spec.duration,
                         [&](double t) { return renderer.render(t); }, spec.seed);
}

// ---------------------------------------------------------------------------
// Datasets

std::string_view split_name(Split s) { return s == Split::kTrain ? "train" : "val"; }

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

std::vector<Split> assign_splits(const std::vector<ScenarioSpec>& specs, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  }
  std::vector<Split> splits(specs.size(), Split::kVal);
  for (GestureClass c : kAllClasses) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (specs[i].label == c) idx.push_back(i);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return detail::splitmix64(specs[a].seed) < detail::splitmix64(specs[b].seed);
    });
    const auto n_train = static_cast<std::size_t>(std::llround(idx.size() * train_fraction));
    for (std::size_t j = 0; j < n_train && j < idx.size(); ++j) splits[idx[j]] = Split::kTrain;
  }
  return splits;
}

namespace {

using nlohmann::json;

json kinematics_to_json(const Kinematics& k) {
  return json{{"palm_x", k.palm_x},
              {"palm_y", k.palm_y},
              {"palm_rx", k.palm_rx},
              {"palm_ry", k.palm_ry},
              {"thumb_r", k.thumb_r},
              {"thumb_dx", k.thumb_dx},
              {"thumb_dy", k.thumb_dy},
              {"swipe_speed", k.swipe_speed},
              {"swipe_direction", k.swipe_direction},
              {"pinch_distance", k.pinch_distance},
              {"pinch_cycles", k.pinch_cycles},
              {"pinch_hold", k.pinch_hold},
              {"rest_jitter", k.rest_jitter},
              {"jitter_freq", k.jitter_freq},
              {"hand_vx", k.hand_vx},
              {"hand_vy", k.hand_vy},
              {"wander_amplitude", k.wander_amplitude},
              {"wander_fx", k.wander_fx},
              {"wander_fy", k.wander_fy},
              {"wander_phase_x", k.wander_phase_x},
              {"wander_phase_y", k.wander_phase_y},
              {"drift_vx", k.drift_vx},
              {"drift_vy", k.drift_vy}};
}

Kinematics kinematics_from_json(const json& j) {
  Kinematics k;
  j.at("palm_x").get_to(k.palm_x);
  j.at("palm_y").get_to(k.palm_y);
  j.at("palm_rx").get_to(k.palm_rx);
  j.at("palm_ry").get_to(k.palm_ry);
  j.at("thumb_r").get_to(k.thumb_r);
  j.at("thumb_dx").get_to(k.thumb_dx);
  j.at("thumb_dy").get_to(k.thumb_dy);
  j.at("swipe_speed").get_to(k.swipe_speed);
  j.at("swipe_direction").get_to(k.swipe_direction);
  j.at("pinch_distance").get_to(k.pinch_distance);
  j.at("pinch_cycles").get_to(k.pinch_cycles);
  j.at("pinch_hold").get_to(k.pinch_hold);
  j.at("rest_jitter").get_to(k.rest_jitter);
  j.at("jitter_freq").get_to(k.jitter_freq);
  j.at("hand_vx").get_to(k.hand_vx);
  j.at("hand_vy").get_to(k.hand_vy);
  j.at("wander_amplitude").get_to(k.wander_amplitude);
  j.at("wander_fx").get_to(k.wander_fx);
  j.at("wander_fy").get_to(k.wander_fy);
  j.at("wander_phase_x").get_to(k.wander_phase_x);
  j.at("wander_phase_y").get_to(k.wander_phase_y);
  j.at("drift_vx").get_to(k.drift_vx);
  j.at("drift_vy").get_to(k.drift_vy);
  return k;
}

std::string seed_filename(std::uint64_t seed) { return std::to_string(seed) + ".hev1"; }

}  // namespace

DatasetManifest build_dataset(const std::vector<ScenarioSpec>& specs, const EsimConfig& config,
                              double train_fraction, const std::filesystem::path& out) {
  namespace fs = std::filesystem;
  if (specs.empty()) throw std::invalid_argument("build_dataset: no scenarios");
  if (!config.valid()) throw std::invalid_argument("build_dataset: invalid EsimConfig");
  const auto splits = assign_splits(specs, train_fraction);

  DatasetManifest manifest;
  manifest.root = out;
  manifest.geometry = specs.front().geometry;
  manifest.esim = config;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ScenarioSpec& spec = specs[i];
    if (spec.geometry != manifest.geometry) {
      throw std::invalid_argument("build_dataset: mixed sensor geometries");
    }
    const fs::path rel = fs::path(split_name(splits[i])) / class_name(spec.label) /
                         seed_filename(spec.seed);
    const fs::path full = out / rel;
    std::error_code ec;
    fs::create_directories(full.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create " + full.parent_path().string() + ": " + ec.message());
    const EventStream stream = generate_events(spec, config);
    write_hev1(full, stream);
    manifest.entries.push_back({rel.generic_string(), spec, splits[i], stream.events.size()});
  }
  write_manifest(manifest);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"label", class_name(e.spec.label)},
                       {"duration", e.spec.duration},
                       {"seed", e.spec.seed},
                       {"split", split_name(e.split)},
                       {"events", e.event_count},
                       {"kinematics", kinematics_to_json(e.spec.kinematics)}});
  }
  const json doc{{"version", kManifestVersion},
                 {"geometry", {{"width", manifest.geometry.width}, {"height", manifest.geometry.height}}},
                 {"esim",
                  {{"contrast_threshold_pos", manifest.esim.contrast_threshold_pos},
                   {"contrast_threshold_neg", manifest.esim.contrast_threshold_neg},
                   {"sample_rate", manifest.esim.sample_rate},
                   {"refractory_period", manifest.esim.refractory_period},
                   {"noise_rate", manifest.esim.noise_rate}}},
                 {"entries", entries}};
  const auto path = manifest.root / "manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

DatasetManifest read_manifest(const std::filesystem::path& root) {
  const auto path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  if (doc.value("version", 0) != kManifestVersion) {
    throw std::runtime_error(path.string() + ": unsupported manifest version");
  }
  DatasetManifest m;
  m.root = root;
  try {
    m.geometry.width = doc.at("geometry").at("width").get<std::uint16_t>();
    m.geometry.height = doc.at("geometry").at("height").get<std::uint16_t>();
    if (doc.contains("esim")) {
      const auto& e = doc["esim"];
      m.esim.contrast_threshold_pos = e.at("contrast_threshold_pos").get<double>();
      m.esim.contrast_threshold_neg = e.at("contrast_threshold_neg").get<double>();
      m.esim.sample_rate = e.at("sample_rate").get<double>();
      m.esim.refractory_period = e.at("refractory_period").get<Timestamp>();
      m.esim.noise_rate = e.at("noise_rate").get<double>();
    }
    for (const auto& je : doc.at("entries")) {
      ManifestEntry e;
      e.path = je.at("path").get<std::string>();
      const auto label = parse_class(je.at("label").get<std::string>());
      if (!label) throw std::runtime_error("unknown label " + je.at("label").dump());
      e.spec.label = *label;
      e.spec.duration = je.at("duration").get<double>();
      e.spec.seed = je.at("seed").get<std::uint64_t>();
      e.spec.geometry = m.geometry;
      e.spec.kinematics = kinematics_from_json(je.at("kinematics"));
      const auto split = je.at("split").get<std::string>();
      if (split != "train" && split != "val") throw std::runtime_error("bad split " + split);
      e.split = split == "train" ? Split::kTrain : Split::kVal;
      e.event_count = je.value("events", std::size_t{0});
      m.entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace evg
