#include "evg/train.hpp"

#include <algorithm>
#include <numeric>

#include "evg/detail/rng.hpp"
#include "evg/eval.hpp"

namespace evg {

std::vector<Timestamp> training_window_ends(double duration, const AggregatorConfig& config,
                                           Timestamp phase) {
  // Every window of the shifted stride grid that overlaps the recording, so
  // the model also sees gesture onsets and tails the way the live pipeline
  // does, at whatever offset the gesture starts relative to the grid.
  const Timestamp end = seconds_to_us(duration) + config.window_length;
  std::vector<Timestamp> ends;
  for (Timestamp t = phase % config.stride; t < end; t += config.stride) {
    if (t > 0) ends.push_back(t);
  }
  return ends;
}

Timestamp window_phase(const ScenarioSpec& spec, const AggregatorConfig& config) {
  return static_cast<Timestamp>(detail::hash_combine(spec.seed, 0x9a5e) %
                                static_cast<std::uint64_t>(config.stride));
}

Target window_target(const ScenarioSpec& spec, Timestamp window_end, Timestamp window_length) {
  Target target;
  target.label = spec.label;
  const double t1 = static_cast<double>(window_end) * 1e-6;
  const double t0 = t1 - static_cast<double>(window_length) * 1e-6;
  target.bbox = hand_box(spec, std::max(0.0, t0), std::min(t1, spec.duration));
  return target;
}

std::vector<LabeledSurface> sample_surfaces(const ScenarioSpec& spec, const EventStream& events,
                                            const AggregatorConfig& config, std::uint32_t source) {
  std::vector<LabeledSurface> out;
  for (Timestamp t : training_window_ends(spec.duration, config, window_phase(spec, config))) {
    out.push_back({build_time_surface(events, t, config.window_length),
                   window_target(spec, t, config.window_length), source});
  }
  return out;
}

std::vector<LabeledSurface> extract_surfaces(const DatasetManifest& manifest, Split split,
                                             const AggregatorConfig& config) {
  std::vector<LabeledSurface> out;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& entry = manifest.entries[i];
    if (entry.split != split) continue;
    const EventStream events = read_hev1(manifest.root / entry.path);
    auto s = sample_surfaces(entry.spec, events, config, static_cast<std::uint32_t>(i));
    std::move(s.begin(), s.end(), std::back_inserter(out));
  }
  return out;
}

TrainResult train(const std::vector<LabeledSurface>& train_set,
                  const std::vector<LabeledSurface>& val_set, const ModelConfig& model_config,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw ModelConfigError("training needs non-empty train and validation sets");
  }
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& s : *set) {
      if (s.surface.geometry != model_config.input) {
        throw ModelConfigError("surface geometry does not match the model input");
      }
    }
  }

  const Model model(model_config);
  ModelParams params = model.init_params(config.seed);
  ModelParams grads = params.zeros_like();
  AdamState<float> adam = AdamState<float>::zeros_like(params);
  ForwardCache<float> cache;

  TrainResult result;
  result.params = params;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    m.learning_rate = lr_schedule(epoch, config);
    detail::Rng shuffle_rng(detail::hash_combine(config.seed, 0x5eed0000ULL + epoch));
    shuffle_rng.shuffle(order.begin(), order.end());

    std::uint64_t correct = 0, hand_count = 0;
    double gesture_sum = 0.0, bbox_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::size_t batch_hands = 0;
      for (std::size_t i = start; i < end; ++i) {
        if (train_set[order[i]].target.label != GestureClass::kNoHand) ++batch_hands;
      }
      const double gesture_weight = 1.0 / static_cast<double>(end - start);
      const double bbox_weight = batch_hands ? config.lambda / static_cast<double>(batch_hands) : 0.0;
      grads.zero();
      for (std::size_t i = start; i < end; ++i) {
        const auto& sample = train_set[order[i]];
        ForwardOptions opts;
        opts.training = true;
        opts.dropout_seed = detail::hash_combine(config.seed, step * 1'000'003ULL + i);
        const ModelOutput out = model.forward(params, sample.surface, opts, cache);
        const LossBreakdown loss = compute_loss(out, sample.target, config.lambda);
        gesture_sum += loss.gesture;
        if (sample.target.label != GestureClass::kNoHand) {
          bbox_sum += loss.bbox;
          ++hand_count;
        }
        if (out.argmax() == sample.target.label) ++correct;
        model.backward(params, cache, sample.target, gesture_weight, bbox_weight, grads);
      }
      adam_step(params, grads, adam, m.learning_rate);
      ++step;
    }
    m.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    m.train_gesture_loss = gesture_sum / static_cast<double>(train_set.size());
    m.train_bbox_loss = hand_count ? bbox_sum / static_cast<double>(hand_count) : 0.0;

    const SplitEvaluation val = evaluate_surfaces(model, params, val_set);
    m.val_accuracy = val.accuracy;
    m.val_gesture_loss = val.mean_gesture_loss;
    m.val_bbox_loss = val.mean_bbox_loss;
    result.history.push_back(m);
    if (result.best_epoch < 0 || m.val_accuracy > result.best_val_accuracy) {
      result.best_epoch = epoch;
      result.best_val_accuracy = m.val_accuracy;
      result.params = params;
    }
    if (on_epoch && !on_epoch(m)) break;
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest, const ModelConfig& model_config,
                  const TrainConfig& config, const AggregatorConfig& aggregator,
                  const EpochCallback& on_epoch) {
  if (manifest.geometry != model_config.input) {
    throw ModelConfigError("dataset geometry " + std::to_string(manifest.geometry.width) + "x" +
                           std::to_string(manifest.geometry.height) +
                           " does not match the model input");
  }
  const auto train_set = extract_surfaces(manifest, Split::kTrain, aggregator);
  const auto val_set = extract_surfaces(manifest, Split::kVal, aggregator);
  return train(train_set, val_set, model_config, config, on_epoch);
}

}  // namespace evg
