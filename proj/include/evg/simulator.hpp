#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evg/detail/rng.hpp"
#include "evg/events.hpp"
#include "evg/representation.hpp"

namespace evg {

/// Canonical class order; the underlying value is the output index.
enum class GestureClass : std::uint8_t {
  kNoHand = 0,
  kHandUnknown = 1,
  kSwipeLeft = 2,
  kSwipeRight = 3,
  kRest = 4,
  kDoublePinch = 5,
  kMovingPinch = 6,
};

inline constexpr int kNumClasses = 7;
inline constexpr std::array<GestureClass, kNumClasses> kAllClasses = {
    GestureClass::kNoHand,     GestureClass::kHandUnknown, GestureClass::kSwipeLeft,
    GestureClass::kSwipeRight, GestureClass::kRest,        GestureClass::kDoublePinch,
    GestureClass::kMovingPinch};

constexpr int index_of(GestureClass c) noexcept { return static_cast<int>(c); }
constexpr GestureClass class_at(int i) noexcept { return static_cast<GestureClass>(i); }

std::string_view class_name(GestureClass c);        // "swipe_left"
std::string_view class_short_name(GestureClass c);  // "sl"
/// Accepts either the long or the short name.
std::optional<GestureClass> parse_class(std::string_view name);

struct Kinematics {
  // Hand proxy layout (pixels).
  double palm_x = 0, palm_y = 0;
  double palm_rx = 10, palm_ry = 12;
  double thumb_r = 3.5;
  double thumb_dx = 0, thumb_dy = 0;  // thumb rest offset from palm center

  double swipe_speed = 0;      // px/s
  int swipe_direction = 1;     // +1 rightwards, -1 leftwards
  double pinch_distance = 0;   // px, thumb travel toward the palm top
  int pinch_cycles = 0;
  double pinch_hold = 0;       // s, closed dwell per cycle
  double rest_jitter = 0;      // px amplitude
  double jitter_freq = 4;      // Hz
  double hand_vx = 0, hand_vy = 0;        // px/s whole-hand translation
  double wander_amplitude = 0;            // px, random hand motion
  double wander_fx = 1, wander_fy = 1;    // Hz
  double wander_phase_x = 0, wander_phase_y = 0;
  double drift_vx = 0, drift_vy = 0;      // px/s background ego-motion

  bool operator==(const Kinematics&) const = default;
};

struct ScenarioSpec {
  GestureClass label = GestureClass::kNoHand;
  double duration = 1.0;  // s
  SensorGeometry geometry;
  std::uint64_t seed = 0;
  Kinematics kinematics;

  bool valid() const noexcept;
  bool operator==(const ScenarioSpec&) const = default;
};

/// Random class-appropriate kinematics drawn deterministically from the seed.
ScenarioSpec make_scenario(GestureClass label, SensorGeometry geometry, std::uint64_t seed,
                           double duration = 1.0);

struct EsimConfig {
  double contrast_threshold_pos = 0.2;
  double contrast_threshold_neg = 0.2;
  double sample_rate = 1000.0;   // Hz
  Timestamp refractory_period = 0;  // µs
  double noise_rate = 0.0;       // events / pixel / s

  bool valid() const noexcept;
};

struct LogFrame {
  SensorGeometry geometry;
  std::vector<double> values;  // row-major log intensity
  Timestamp timestamp = 0;

  double at(int y, int x) const { return values[static_cast<std::size_t>(y) * geometry.width + x]; }
};

struct HandPose {
  bool visible = false;
  double palm_x = 0, palm_y = 0, palm_rx = 0, palm_ry = 0;
  double thumb_x = 0, thumb_y = 0, thumb_r = 0;
};

HandPose hand_pose(const ScenarioSpec& spec, double t);

/// Union of the hand proxy extent over [t0, t1] as a normalized box clipped
/// to the frame. Returns nullopt when no hand is visible.
std::optional<BoundingBox> hand_box(const ScenarioSpec& spec, double t0, double t1);

/// Renders the log-intensity frame at time t (seconds). Throws
/// std::out_of_range when t lies outside [0, duration].
LogFrame render_scene(const ScenarioSpec& spec, double t);

/// Reusable renderer; precomputes the background texture basis once.
class SceneRenderer {
 public:
  explicit SceneRenderer(ScenarioSpec spec);
  LogFrame render(double t) const;
  const ScenarioSpec& spec() const noexcept { return spec_; }

 private:
  ScenarioSpec spec_;
  static constexpr int kWaves = 6;
  // Per wave: wave vector and per-pixel sin/cos of the static phase.
  std::array<double, kWaves> kx_{}, ky_{}, amp_{};
  std::vector<double> sin_, cos_;  // kWaves * pixels
  std::vector<double> static_background_;
};

/// Log-intensity levels and edge softness of the hand proxy.
inline constexpr double kPalmLevel = 1.2;
inline constexpr double kThumbLevel = 1.8;
inline constexpr double kEdgeWidth = 1.0;  // px

/// Composites the hand proxy over `values` (row-major, geometry-sized).
void draw_hand(const HandPose& pose, SensorGeometry geometry, std::vector<double>& values);

/// ESIM-style converter: feed successive frames, receive threshold-crossing
/// events at linearly interpolated times.
class EventGenerator {
 public:
  EventGenerator(SensorGeometry geometry, EsimConfig config, std::uint64_t noise_seed = 0);

  /// First frame sets the per-pixel reference levels; emits nothing.
  void reset(const LogFrame& frame);
  /// Appends events for the interval since the previous frame.
  void add_frame(const LogFrame& frame, std::vector<Event>& out);
  bool initialized() const noexcept { return initialized_; }

 private:
  SensorGeometry geometry_;
  EsimConfig config_;
  std::vector<double> reference_;
  std::vector<double> previous_;
  std::vector<std::int64_t> last_fire_;  // -1 when the pixel never fired
  Timestamp previous_t_ = 0;
  bool initialized_ = false;
  detail::Rng noise_;
  std::vector<Event> pending_;
};

/// Samples times for a span of `duration` seconds at `sample_rate`, always
/// including both endpoints.
std::vector<double> sample_times(double duration, double sample_rate);

EventStream generate_events(const ScenarioSpec& spec, const EsimConfig& config);

/// Frame-level variant: samples `frame_at` over [0, duration] seconds.
using FrameSource = std::function<LogFrame(double t)>;
EventStream generate_events(SensorGeometry geometry, const EsimConfig& config, double duration,
                            const FrameSource& frame_at, std::uint64_t noise_seed = 0);

inline Timestamp seconds_to_us(double t) { return static_cast<Timestamp>(std::llround(t * 1e6)); }

// ---------------------------------------------------------------------------
// Datasets

enum class Split { kTrain, kVal };
std::string_view split_name(Split s);

struct ManifestEntry {
  std::string path;  // relative to the manifest root
  ScenarioSpec spec;
  Split split = Split::kTrain;
  std::size_t event_count = 0;
};

struct DatasetManifest {
  std::filesystem::path root;
  SensorGeometry geometry;
  EsimConfig esim;
  std::vector<ManifestEntry> entries;

  std::vector<const ManifestEntry*> split(Split s) const;
};

inline constexpr int kManifestVersion = 1;

/// Deterministic stratified split: within each class, entries are ranked by
/// a hash of their seed and the first round(n * fraction) go to train.
std::vector<Split> assign_splits(const std::vector<ScenarioSpec>& specs, double train_fraction);

DatasetManifest build_dataset(const std::vector<ScenarioSpec>& specs, const EsimConfig& config,
                              double train_fraction, const std::filesystem::path& out);

void write_manifest(const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root);

/// Convenience: `per_class` scenarios for each listed class with seeds
/// derived from `seed`.
std::vector<ScenarioSpec> make_scenarios(const std::vector<GestureClass>& classes, int per_class,
                                         SensorGeometry geometry, std::uint64_t seed,
                                         double duration = 1.0);

}  // namespace evg
