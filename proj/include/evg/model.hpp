#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "evg/nn.hpp"
#include "evg/representation.hpp"
#include "evg/simulator.hpp"
#include "evg/tensor.hpp"

namespace evg {

inline constexpr int kGestureSubclasses = 6;  // every class except no_hand

class ModelConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConvLayerSpec {
  int channels = 8;
  int stride = 2;
  bool operator==(const ConvLayerSpec&) const = default;
};

struct StageSpec {
  std::vector<ConvLayerSpec> convs;
  int dense_width = 64;
  bool operator==(const StageSpec&) const = default;
};

struct ModelConfig {
  SensorGeometry input{64, 64};
  int crop_size = 32;
  int kernel = 3;
  StageSpec stage1;
  StageSpec stage2;
  double dropout = 0.2;
  int gesture_classes = kGestureSubclasses;
  int total_classes = kNumClasses;

  /// 64x64 input, 32 px crops: small enough to train on one CPU core.
  static ModelConfig desk();
  /// Same shape as desk() at 16x16 with a few thousand parameters.
  static ModelConfig tiny();
  /// 320x320 input with 64 px crops, sized near the reference parameter budget.
  static ModelConfig paper();
  static ModelConfig preset(std::string_view name);

  /// Throws ModelConfigError when the configuration cannot be realized.
  void validate() const;
  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  bool operator==(const ModelConfig&) const = default;
};

/// Named parameter tensors in a fixed, config-determined order.
template <typename T>
struct Params {
  std::vector<std::string> names;
  std::vector<BasicTensor<T>> tensors;

  std::size_t size() const noexcept { return tensors.size(); }
  std::optional<std::size_t> index_of(std::string_view name) const;
  BasicTensor<T>& operator[](std::size_t i) { return tensors[i]; }
  const BasicTensor<T>& operator[](std::size_t i) const { return tensors[i]; }
  void zero() {
    for (auto& t : tensors) t.fill(T{0});
  }
  /// Same names and shapes, all zeros.
  Params zeros_like() const {
    Params out = *this;
    out.zero();
    return out;
  }
  template <typename U>
  Params<U> cast() const {
    Params<U> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }
  bool operator==(const Params&) const = default;
};

using ModelParams = Params<float>;

struct ParamShape {
  std::string name;
  std::vector<int> shape;
};

/// One multiply-accumulate layer, for size and cost reporting.
struct LayerCost {
  std::string name;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct ModelOutput {
  BoundingBox bbox;
  double hand_logit = 0.0;
  double p_hand = 0.0;
  std::array<double, kGestureSubclasses> gesture_probs{};
  std::array<double, kNumClasses> final_probs{};

  GestureClass argmax() const;
};

struct Target {
  GestureClass label = GestureClass::kNoHand;
  std::optional<BoundingBox> bbox;  // present iff label != no_hand
};

struct LossBreakdown {
  double total = 0.0;
  double gesture = 0.0;
  double bbox = 0.0;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// L_gesture = -log(max(final_probs[label], 1e-12)); L_bbox is the MSE over
/// the four box values when a hand is present, else exactly 0.
LossBreakdown compute_loss(const ModelOutput& output, const Target& target, double lambda);

struct ForwardOptions {
  bool training = false;
  std::uint64_t dropout_seed = 0;
  /// Crop stage 2 with this box instead of the predicted one.
  std::optional<BoundingBox> crop_box;
};

template <typename T>
struct TrunkCache {
  std::vector<std::vector<T>> cols;  // im2col of each conv input
  std::vector<std::vector<T>> z;     // conv pre-activations
  std::vector<T> flat;               // last conv activation
  std::vector<T> dense_z, dense_a, mask, out;
};

template <typename T>
struct ForwardCache {
  TrunkCache<T> stage1, stage2;
  std::vector<T> input;
  std::vector<T> crop;
  std::array<double, 4> bbox_sigmoid{};
  BoundingBox crop_box;
  bool crop_degenerate = false;
  ModelOutput output;
};

/// Two-stage detector/classifier: stage 1 sees the full surface and predicts
/// a hand box plus a hand-presence logit; stage 2 sees the box crop and
/// predicts the six gesture sub-classes. The crop is a stop-gradient.
template <typename T>
class TwoStageModel {
 public:
  explicit TwoStageModel(ModelConfig config);

  const ModelConfig& config() const noexcept { return config_; }
  const std::vector<ParamShape>& param_shapes() const noexcept { return shapes_; }

  Params<T> init_params(std::uint64_t seed) const;

  /// Throws ModelConfigError when names or shapes disagree with the config.
  void check_params(const Params<T>& params) const;

  ModelOutput forward(const Params<T>& params, const TimeSurface& surface,
                      const ForwardOptions& options, ForwardCache<T>& cache) const;
  ModelOutput forward(const Params<T>& params, const TimeSurface& surface,
                      const ForwardOptions& options = {}) const;

  /// Accumulates into `grads` the gradient of
  ///   gesture_weight * L_gesture + bbox_weight * L_bbox
  /// for the sample cached by the last training forward.
  void backward(const Params<T>& params, const ForwardCache<T>& cache, const Target& target,
                double gesture_weight, double bbox_weight, Params<T>& grads) const;

 private:
  struct StageLayout {
    std::vector<nn::ConvGeometry> convs;
    std::size_t first_param = 0;  // conv weights/biases, then dense weight/bias
    int flat_size = 0;
  };

  void run_trunk(const Params<T>& params, const StageLayout& layout, const std::vector<T>& input,
                 bool training, std::uint64_t mask_seed, TrunkCache<T>& cache) const;
  /// d_out is the gradient w.r.t. the trunk output; consumed.
  void backprop_trunk(const Params<T>& params, const StageLayout& layout, const TrunkCache<T>& cache,
                      std::vector<T>& d_out, Params<T>& grads) const;

  ModelConfig config_;
  std::vector<ParamShape> shapes_;
  StageLayout s1_, s2_;
  std::size_t bbox_w_ = 0, hand_w_ = 0, gesture_w_ = 0;
};

extern template class TwoStageModel<float>;
extern template class TwoStageModel<double>;

using Model = TwoStageModel<float>;

std::vector<LayerCost> layer_costs(const ModelConfig& config);
std::uint64_t count_params(const ModelConfig& config);
/// FLOPs = 2 x multiply-accumulates over all conv and dense layers.
std::uint64_t flops_estimate(const ModelConfig& config);

template <typename T>
std::uint64_t count_params(const Params<T>& params) {
  std::uint64_t n = 0;
  for (const auto& t : params.tensors) n += t.size();
  return n;
}

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
struct AdamState {
  Params<T> m, v;
  std::uint64_t step = 0;  // number of updates applied

  static AdamState zeros_like(const Params<T>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One bias-corrected Adam update at learning rate `lr`.
template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& config = {});

struct TrainConfig {
  int epochs = 35;
  int batch_size = 1024;
  double learning_rate = 0.0005;
  int hold_epochs = 10;
  double final_lr_fraction = 0.1;
  double lambda = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// lr0 through the hold period, then linear decay to lr0 * final_fraction at
/// the last epoch.
double lr_schedule(int epoch, const TrainConfig& config);

}  // namespace evg
