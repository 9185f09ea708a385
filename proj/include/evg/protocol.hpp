#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "evg/eval.hpp"
#include "evg/pipeline.hpp"

namespace evg {

struct TrialConfig {
  std::vector<GestureClass> gestures{GestureClass::kDoublePinch, GestureClass::kSwipeLeft,
                                     GestureClass::kSwipeRight};
  int repetitions = 10;
  double gap_s = 1.5;
  double window_s = 2.0;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on empty or non-emittable gesture lists,
  /// non-positive timings, or repetitions < 1.
  void validate() const;
};

/// One prompt: the gesture is requested over (window_start, window_end].
struct PromptSlot {
  GestureClass gesture = GestureClass::kSwipeLeft;
  Timestamp window_start = 0;
  Timestamp window_end = 0;
  bool operator==(const PromptSlot&) const = default;
};

/// Seeded shuffle of repetitions x gestures laid out as gap, window, gap,
/// window, ... starting at `origin`.
std::vector<PromptSlot> make_schedule(const TrialConfig& config, Timestamp origin = 0);

/// End of the last response window.
Timestamp schedule_end(const std::vector<PromptSlot>& schedule);

struct TrialResult {
  std::vector<PromptSlot> schedule;
  std::vector<TrialRecord> records;  // one per prompt, schedule order
  std::vector<GestureClass> gap_detections;
  std::vector<DetectionEvent> detections;
  std::vector<GestureScore> scores;
};

/// Scores detections against a schedule. The first detection with t_L in a
/// slot's window decides hit or failure; later ones in the same window are
/// not scored. Detections outside every window are gap detections.
/// Only slots whose window has closed by `now` get a record.
TrialResult score_trial(const std::vector<PromptSlot>& schedule,
                        const std::vector<DetectionEvent>& detections,
                        const std::vector<GestureClass>& gestures,
                        Timestamp now = ~Timestamp{0});

/// Produces the event stream for the `index`-th prompt of `gesture`, with
/// timestamps relative to the start of the response window.
using Performer = std::function<EventStream(GestureClass gesture, std::size_t index)>;

/// A performer backed by the simulator: a fresh scenario per prompt that
/// starts `reaction_s` into the window and lasts `duration_s`.
Performer simulator_performer(SensorGeometry geometry, EsimConfig esim, std::uint64_t seed,
                              double duration_s = 1.0, double reaction_s = 0.25);

/// Splices each prompt's performer stream into one timeline (silence in the
/// gaps), clipped to its window.
EventStream build_trial_stream(const std::vector<PromptSlot>& schedule, const Performer& performer,
                               SensorGeometry geometry);

/// Builds the schedule, runs the streaming pipeline once over the spliced
/// timeline, and scores it.
TrialResult run_trial_protocol(const Model& model, const ModelParams& params,
                               const PipelineConfig& pipeline, const Performer& performer,
                               const TrialConfig& config);

}  // namespace evg
