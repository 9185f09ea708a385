#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "evg/model.hpp"
#include "evg/representation.hpp"
#include "evg/simulator.hpp"

namespace evg {

/// One supervised example: a time surface with its class and hand box.
struct LabeledSurface {
  TimeSurface surface;
  Target target;
  std::uint32_t source = 0;  // manifest entry index
};

/// Window ends used to cut examples from a sample of `duration` seconds:
/// every positive t_L = phase + k * stride whose window [t_L - L, t_L] still
/// overlaps [0, duration).
std::vector<Timestamp> training_window_ends(double duration, const AggregatorConfig& config,
                                           Timestamp phase = 0);
/// Per-sample grid offset in [0, stride), derived from the sample seed. Live
/// gestures start at arbitrary offsets from the inference grid.
Timestamp window_phase(const ScenarioSpec& spec, const AggregatorConfig& config);

/// Box target for a window: union of the hand extent over the part of
/// [t_L - L, t_L] that overlaps the sample. Empty for no_hand.
Target window_target(const ScenarioSpec& spec, Timestamp window_end, Timestamp window_length);

std::vector<LabeledSurface> sample_surfaces(const ScenarioSpec& spec, const EventStream& events,
                                            const AggregatorConfig& config, std::uint32_t source = 0);

/// Reads every entry of the split and cuts its surfaces, in manifest order.
std::vector<LabeledSurface> extract_surfaces(const DatasetManifest& manifest, Split split,
                                             const AggregatorConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double learning_rate = 0.0;
  double train_accuracy = 0.0;  // from the dropout-on training forwards
  double train_gesture_loss = 0.0;
  double train_bbox_loss = 0.0;  // mean over hand-present surfaces
  double val_accuracy = 0.0;
  double val_gesture_loss = 0.0;
  double val_bbox_loss = 0.0;
  bool operator==(const EpochMetrics&) const = default;
};

struct TrainResult {
  ModelParams params;  // parameters of the best validation epoch
  std::vector<EpochMetrics> history;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
};

/// Called after each epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochMetrics&)>;

/// Throws ModelConfigError when either set is empty or geometries disagree.
TrainResult train(const std::vector<LabeledSurface>& train_set,
                  const std::vector<LabeledSurface>& val_set, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

TrainResult train(const DatasetManifest& manifest, const ModelConfig& model_config,
                  const TrainConfig& config, const AggregatorConfig& aggregator,
                  const EpochCallback& on_epoch = {});

}  // namespace evg
