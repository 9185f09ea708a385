#include "evg/protocol.hpp"

#include <stdexcept>

#include "evg/detail/rng.hpp"

namespace evg {

void TrialConfig::validate() const {
  if (gestures.empty()) throw std::invalid_argument("trial needs at least one gesture");
  for (GestureClass g : gestures) {
    if (!ThresholdPolicy::emittable(g)) {
      throw std::invalid_argument(std::string(class_name(g)) + " cannot be prompted");
    }
  }
  if (repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
  if (!(gap_s > 0.0) || !(window_s > 0.0)) {
    throw std::invalid_argument("gap and window must be positive");
  }
}

std::vector<PromptSlot> make_schedule(const TrialConfig& config, Timestamp origin) {
  config.validate();
  std::vector<GestureClass> order;
  for (int r = 0; r < config.repetitions; ++r) {
    order.insert(order.end(), config.gestures.begin(), config.gestures.end());
  }
  detail::Rng rng(detail::hash_combine(config.seed, 0x7e1a1ULL));
  rng.shuffle(order.begin(), order.end());

  const Timestamp gap = seconds_to_us(config.gap_s);
  const Timestamp window = seconds_to_us(config.window_s);
  std::vector<PromptSlot> schedule;
  Timestamp t = origin;
  for (GestureClass g : order) {
    t += gap;
    schedule.push_back({g, t, t + window});
    t += window;
  }
  return schedule;
}

Timestamp schedule_end(const std::vector<PromptSlot>& schedule) {
  return schedule.empty() ? 0 : schedule.back().window_end;
}

TrialResult score_trial(const std::vector<PromptSlot>& schedule,
                        const std::vector<DetectionEvent>& detections,
                        const std::vector<GestureClass>& gestures, Timestamp now) {
  TrialResult result;
  result.schedule = schedule;
  result.detections = detections;
  std::vector<std::optional<const DetectionEvent*>> first(schedule.size());
  for (const auto& d : detections) {
    bool in_window = false;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const auto& s = schedule[i];
      if (d.window_end > s.window_start && d.window_end <= s.window_end) {
        in_window = true;
        if (!first[i] || d.window_end < (*first[i])->window_end) first[i] = &d;
        break;
      }
    }
    if (!in_window && d.window_end <= now) result.gap_detections.push_back(d.gesture);
  }
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    const auto& s = schedule[i];
    TrialRecord r;
    r.prompted = s.gesture;
    if (first[i]) {
      const DetectionEvent& d = **first[i];
      r.observed = d.gesture;
      if (d.gesture == s.gesture) {
        r.outcome = Outcome::kHit;
        r.latency_us = d.window_end - s.window_start;
      } else {
        r.outcome = Outcome::kFailure;
      }
    } else if (s.window_end > now) {
      continue;  // still open and unanswered
    }
    result.records.push_back(r);
  }
  result.scores = precision_recall(result.records, gestures, result.gap_detections);
  return result;
}

Performer simulator_performer(SensorGeometry geometry, EsimConfig esim, std::uint64_t seed,
                              double duration_s, double reaction_s) {
  return [=](GestureClass gesture, std::size_t index) {
    const std::uint64_t s = detail::hash_combine(
        detail::hash_combine(seed, static_cast<std::uint64_t>(index_of(gesture))), index);
    const ScenarioSpec spec = make_scenario(gesture, geometry, s, duration_s);
    EventStream stream = generate_events(spec, esim);
    const Timestamp offset = seconds_to_us(reaction_s);
    for (auto& e : stream.events) e.t += offset;
    return stream;
  };
}

EventStream build_trial_stream(const std::vector<PromptSlot>& schedule, const Performer& performer,
                               SensorGeometry geometry) {
  EventStream out;
  out.geometry = geometry;
  std::array<std::size_t, kNumClasses> seen{};
  for (const auto& slot : schedule) {
    const EventStream part = performer(slot.gesture, seen[index_of(slot.gesture)]++);
    if (part.geometry != geometry) {
      throw std::invalid_argument("performer geometry does not match the trial geometry");
    }
    const Timestamp span = slot.window_end - slot.window_start;
    for (Event e : part.events) {
      if (e.t >= span) break;
      e.t += slot.window_start;
      out.events.push_back(e);
    }
  }
  return out;
}

TrialResult run_trial_protocol(const Model& model, const ModelParams& params,
                               const PipelineConfig& pipeline, const Performer& performer,
                               const TrialConfig& config) {
  const auto schedule = make_schedule(config, pipeline.origin);
  const EventStream stream = build_trial_stream(schedule, performer, model.config().input);
  const auto detections = run_pipeline(model, params, stream, pipeline, schedule_end(schedule));
  return score_trial(schedule, detections, config.gestures);
}

}  // namespace evg
