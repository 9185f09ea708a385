#include "evg/model.hpp"

#include <algorithm>
#include <cmath>

#include "evg/detail/rng.hpp"
#include "json.hpp"

namespace evg {

// ---------------------------------------------------------------------------
// Config

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.input = {64, 64};
  c.crop_size = 32;
  c.stage1 = {{{8, 2}, {16, 2}, {16, 2}, {32, 2}}, 64};
  c.stage2 = {{{8, 2}, {16, 2}, {32, 2}}, 64};
  return c;
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.input = {16, 16};
  c.crop_size = 8;
  c.stage1 = {{{4, 2}, {8, 2}}, 16};
  c.stage2 = {{{4, 2}, {8, 2}}, 16};
  return c;
}

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.input = {320, 320};
  c.crop_size = 64;
  c.stage1 = {{{16, 2}, {32, 2}, {32, 2}, {64, 2}, {64, 2}}, 64};
  c.stage2 = {{{16, 2}, {32, 2}, {64, 2}, {64, 2}}, 64};
  return c;
}

ModelConfig ModelConfig::preset(std::string_view name) {
  if (name == "desk") return desk();
  if (name == "tiny") return tiny();
  if (name == "paper") return paper();
  throw ModelConfigError("unknown model profile '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (input.width == 0 || input.height == 0) throw ModelConfigError("empty input geometry");
  if (crop_size <= 0 || crop_size > 4096) throw ModelConfigError("crop size must lie in [1, 4096]");
  if (kernel <= 0 || kernel % 2 == 0 || kernel > 15) {
    throw ModelConfigError("kernel must be odd and at most 15");
  }
  if (gesture_classes != kGestureSubclasses || total_classes != kNumClasses) {
    throw ModelConfigError("class counts are fixed at 6 gesture sub-classes / 7 classes");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelConfigError("dropout must lie in [0, 1)");
  for (const StageSpec* s : {&stage1, &stage2}) {
    if (s->convs.empty()) throw ModelConfigError("each stage needs at least one conv layer");
    if (s->dense_width <= 0 || s->dense_width > 65536) {
      throw ModelConfigError("dense width must lie in [1, 65536]");
    }
    for (const auto& c : s->convs) {
      if (c.channels <= 0 || c.channels > 4096 || c.stride <= 0 || c.stride > 16) {
        throw ModelConfigError("bad conv layer spec");
      }
    }
  }
}

namespace {

using nlohmann::json;

json stage_to_json(const StageSpec& s) {
  json convs = json::array();
  for (const auto& c : s.convs) convs.push_back({{"channels", c.channels}, {"stride", c.stride}});
  return {{"convs", convs}, {"dense_width", s.dense_width}};
}

StageSpec stage_from_json(const json& j) {
  StageSpec s;
  for (const auto& c : j.at("convs")) {
    s.convs.push_back({c.at("channels").get<int>(), c.at("stride").get<int>()});
  }
  s.dense_width = j.at("dense_width").get<int>();
  return s;
}

}  // namespace

std::string ModelConfig::to_json() const {
  const json j{{"input", {{"width", input.width}, {"height", input.height}}},
               {"crop_size", crop_size},
               {"kernel", kernel},
               {"stage1", stage_to_json(stage1)},
               {"stage2", stage_to_json(stage2)},
               {"dropout", dropout},
               {"gesture_classes", gesture_classes},
               {"total_classes", total_classes}};
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const json j = json::parse(text);
    c.input.width = j.at("input").at("width").get<std::uint16_t>();
    c.input.height = j.at("input").at("height").get<std::uint16_t>();
    c.crop_size = j.at("crop_size").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.stage1 = stage_from_json(j.at("stage1"));
    c.stage2 = stage_from_json(j.at("stage2"));
    c.dropout = j.at("dropout").get<double>();
    c.gesture_classes = j.at("gesture_classes").get<int>();
    c.total_classes = j.at("total_classes").get<int>();
  } catch (const json::exception& e) {
    throw ModelConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Sizes

namespace {

std::vector<nn::ConvGeometry> stage_convs(const StageSpec& s, int in_channels, int h, int w,
                                          int kernel) {
  std::vector<nn::ConvGeometry> out;
  for (const auto& c : s.convs) {
    nn::ConvGeometry g;
    g.in_channels = in_channels;
    g.in_height = h;
    g.in_width = w;
    g.out_channels = c.channels;
    g.kernel = kernel;
    g.stride = c.stride;
    g.pad = kernel / 2;
    if (g.out_height() <= 0 || g.out_width() <= 0) throw ModelConfigError("conv stack collapses input");
    out.push_back(g);
    in_channels = c.channels;
    h = g.out_height();
    w = g.out_width();
  }
  return out;
}

int flat_size(const std::vector<nn::ConvGeometry>& convs) {
  const auto& last = convs.back();
  const auto n = static_cast<std::int64_t>(last.out_channels) * last.out_height() * last.out_width();
  if (n > (std::int64_t{1} << 28)) throw ModelConfigError("conv trunk output too large");
  return static_cast<int>(n);
}

}  // namespace

std::vector<LayerCost> layer_costs(const ModelConfig& config) {
  config.validate();
  std::vector<LayerCost> out;
  auto add_stage = [&](const std::string& prefix, const StageSpec& spec, int h, int w) {
    const auto convs = stage_convs(spec, TimeSurface::kChannels, h, w, config.kernel);
    for (std::size_t i = 0; i < convs.size(); ++i) {
      const auto& g = convs[i];
      out.push_back({prefix + ".conv" + std::to_string(i), g.weight_count() + g.out_channels,
                     static_cast<std::uint64_t>(g.weight_count()) * g.out_pixels()});
    }
    const std::uint64_t flat = flat_size(convs);
    out.push_back({prefix + ".dense", flat * spec.dense_width + spec.dense_width,
                   flat * spec.dense_width});
    return static_cast<std::uint64_t>(spec.dense_width);
  };
  const auto d1 = add_stage("s1", config.stage1, config.input.height, config.input.width);
  out.push_back({"s1.bbox", d1 * 4 + 4, d1 * 4});
  out.push_back({"s1.hand", d1 + 1, d1});
  const auto d2 = add_stage("s2", config.stage2, config.crop_size, config.crop_size);
  const auto g = static_cast<std::uint64_t>(config.gesture_classes);
  out.push_back({"s2.gesture", d2 * g + g, d2 * g});
  return out;
}

std::uint64_t count_params(const ModelConfig& config) {
  std::uint64_t n = 0;
  for (const auto& l : layer_costs(config)) n += l.params;
  return n;
}

std::uint64_t flops_estimate(const ModelConfig& config) {
  std::uint64_t macs = 0;
  for (const auto& l : layer_costs(config)) macs += l.macs;
  return 2 * macs;
}

// ---------------------------------------------------------------------------
// Output / loss

GestureClass ModelOutput::argmax() const {
  const auto it = std::max_element(final_probs.begin(), final_probs.end());
  return class_at(static_cast<int>(it - final_probs.begin()));
}

LossBreakdown compute_loss(const ModelOutput& output, const Target& target, double lambda) {
  LossBreakdown loss;
  const double p = output.final_probs[index_of(target.label)];
  loss.gesture = -std::log(std::max(p, kProbabilityFloor));
  if (target.label != GestureClass::kNoHand && target.bbox) {
    const std::array<double, 4> pred = {output.bbox.cx, output.bbox.cy, output.bbox.w, output.bbox.h};
    const std::array<double, 4> truth = {target.bbox->cx, target.bbox->cy, target.bbox->w,
                                         target.bbox->h};
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    loss.bbox = sum / 4.0;
  }
  loss.total = loss.gesture + lambda * loss.bbox;
  return loss;
}

template <typename T>
std::optional<std::size_t> Params<T>::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

template struct Params<float>;
template struct Params<double>;

// ---------------------------------------------------------------------------
// Model

template <typename T>
TwoStageModel<T>::TwoStageModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  auto add_stage = [&](const std::string& prefix, const StageSpec& spec, int h, int w,
                       StageLayout& layout) {
    layout.convs = stage_convs(spec, TimeSurface::kChannels, h, w, config_.kernel);
    layout.first_param = shapes_.size();
    for (std::size_t i = 0; i < layout.convs.size(); ++i) {
      const auto& g = layout.convs[i];
      const std::string base = prefix + ".conv" + std::to_string(i);
      shapes_.push_back({base + ".weight", {g.out_channels, g.in_channels, g.kernel, g.kernel}});
      shapes_.push_back({base + ".bias", {g.out_channels}});
    }
    layout.flat_size = flat_size(layout.convs);
    shapes_.push_back({prefix + ".dense.weight", {spec.dense_width, layout.flat_size}});
    shapes_.push_back({prefix + ".dense.bias", {spec.dense_width}});
  };
  add_stage("s1", config_.stage1, config_.input.height, config_.input.width, s1_);
  const int d1 = config_.stage1.dense_width;
  bbox_w_ = shapes_.size();
  shapes_.push_back({"s1.bbox.weight", {4, d1}});
  shapes_.push_back({"s1.bbox.bias", {4}});
  hand_w_ = shapes_.size();
  shapes_.push_back({"s1.hand.weight", {1, d1}});
  shapes_.push_back({"s1.hand.bias", {1}});
  add_stage("s2", config_.stage2, config_.crop_size, config_.crop_size, s2_);
  gesture_w_ = shapes_.size();
  shapes_.push_back({"s2.gesture.weight", {config_.gesture_classes, config_.stage2.dense_width}});
  shapes_.push_back({"s2.gesture.bias", {config_.gesture_classes}});
}

template <typename T>
Params<T> TwoStageModel<T>::init_params(std::uint64_t seed) const {
  Params<T> p;
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    const auto& s = shapes_[i];
    p.names.push_back(s.name);
    BasicTensor<T> t(s.shape);
    if (s.shape.size() > 1) {
      int fan_in = 1;
      for (std::size_t d = 1; d < s.shape.size(); ++d) fan_in *= s.shape[d];
      const bool head = i >= bbox_w_ && (i < s2_.first_param || i >= gesture_w_);
      const double stddev = head ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
      detail::Rng rng(detail::hash_combine(seed, i));
      for (auto& v : t.data) v = static_cast<T>(stddev * rng.normal());
    }
    p.tensors.push_back(std::move(t));
  }
  return p;
}

template <typename T>
void TwoStageModel<T>::check_params(const Params<T>& params) const {
  if (params.names.size() != shapes_.size() || params.tensors.size() != shapes_.size()) {
    throw ModelConfigError("parameter count mismatch: expected " + std::to_string(shapes_.size()) +
                           " tensors, got " + std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < shapes_.size(); ++i) {
    if (params.names[i] != shapes_[i].name) {
      throw ModelConfigError("parameter " + std::to_string(i) + " is '" + params.names[i] +
                             "', expected '" + shapes_[i].name + "'");
    }
    if (params.tensors[i].shape != shapes_[i].shape ||
        params.tensors[i].size() != BasicTensor<T>::element_count(shapes_[i].shape)) {
      throw ModelConfigError("parameter '" + shapes_[i].name + "' has shape " +
                             shape_string(params.tensors[i].shape) + ", expected " +
                             shape_string(shapes_[i].shape));
    }
  }
}

template <typename T>
void TwoStageModel<T>::run_trunk(const Params<T>& params, const StageLayout& layout,
                                 const std::vector<T>& input, bool training, std::uint64_t mask_seed,
                                 TrunkCache<T>& cache) const {
  const std::size_t n = layout.convs.size();
  cache.cols.resize(n);
  cache.z.resize(n);
  std::vector<T> act;
  const std::vector<T>* x = &input;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& g = layout.convs[i];
    auto& cols = cache.cols[i];
    auto& z = cache.z[i];
    cols.resize(static_cast<std::size_t>(g.patch_size()) * g.out_pixels());
    z.resize(static_cast<std::size_t>(g.out_channels) * g.out_pixels());
    nn::im2col<T>(g, *x, cols);
    const auto& w = params[layout.first_param + 2 * i];
    const auto& b = params[layout.first_param + 2 * i + 1];
    nn::conv_forward<T>(g, cols, w.data, b.data, z);
    auto& out = (i + 1 == n) ? cache.flat : act;
    out.resize(z.size());
    nn::silu_forward<T>(z, out);
    x = &out;
  }
  const auto& dw = params[layout.first_param + 2 * n];
  const auto& db = params[layout.first_param + 2 * n + 1];
  const auto width = static_cast<std::size_t>(dw.shape[0]);
  cache.dense_z.resize(width);
  cache.dense_a.resize(width);
  nn::dense_forward<T>(cache.flat, dw.data, db.data, cache.dense_z);
  nn::silu_forward<T>(cache.dense_z, cache.dense_a);
  cache.mask = training ? nn::dropout_mask<T>(width, config_.dropout, mask_seed)
                        : std::vector<T>(width, T{1});
  cache.out.resize(width);
  for (std::size_t i = 0; i < width; ++i) cache.out[i] = cache.dense_a[i] * cache.mask[i];
}

template <typename T>
void TwoStageModel<T>::backprop_trunk(const Params<T>& params, const StageLayout& layout,
                                      const TrunkCache<T>& cache, std::vector<T>& d_out,
                                      Params<T>& grads) const {
  const std::size_t n = layout.convs.size();
  for (std::size_t i = 0; i < d_out.size(); ++i) d_out[i] *= cache.mask[i];
  std::vector<T> dz(d_out.size());
  nn::silu_backward<T>(cache.dense_z, d_out, dz);
  const std::size_t dwi = layout.first_param + 2 * n;
  std::vector<T> d_act(cache.flat.size());
  nn::dense_backward<T>(cache.flat, params[dwi].data, dz, grads[dwi].data, grads[dwi + 1].data,
                        d_act);
  std::vector<T> dcols, d_prev;
  for (std::size_t li = n; li-- > 0;) {
    const auto& g = layout.convs[li];
    dz.resize(cache.z[li].size());
    nn::silu_backward<T>(cache.z[li], d_act, dz);
    const std::size_t wi = layout.first_param + 2 * li;
    if (li == 0) {
      nn::conv_backward<T>(g, cache.cols[li], params[wi].data, dz, grads[wi].data,
                           grads[wi + 1].data, {});
      break;
    }
    dcols.resize(cache.cols[li].size());
    nn::conv_backward<T>(g, cache.cols[li], params[wi].data, dz, grads[wi].data, grads[wi + 1].data,
                         dcols);
    d_prev.assign(static_cast<std::size_t>(g.in_channels) * g.in_height * g.in_width, T{0});
    nn::col2im_add<T>(g, dcols, d_prev);
    std::swap(d_act, d_prev);
  }
}

template <typename T>
ModelOutput TwoStageModel<T>::forward(const Params<T>& params, const TimeSurface& surface,
                                      const ForwardOptions& options, ForwardCache<T>& cache) const {
  if (surface.geometry != config_.input ||
      surface.values.size() != TimeSurface::kChannels * config_.input.pixel_count()) {
    throw ModelConfigError("surface geometry " + std::to_string(surface.geometry.width) + "x" +
                           std::to_string(surface.geometry.height) + " does not match model input " +
                           std::to_string(config_.input.width) + "x" +
                           std::to_string(config_.input.height));
  }
  ModelOutput& out = cache.output;
  cache.input.assign(surface.values.begin(), surface.values.end());
  run_trunk(params, s1_, cache.input, options.training,
            detail::hash_combine(options.dropout_seed, 1), cache.stage1);

  std::array<T, 4> raw{};
  nn::dense_forward<T>(cache.stage1.out, params[bbox_w_].data, params[bbox_w_ + 1].data, raw);
  for (int i = 0; i < 4; ++i) cache.bbox_sigmoid[i] = nn::sigmoid(static_cast<double>(raw[i]));
  out.bbox = {cache.bbox_sigmoid[0], cache.bbox_sigmoid[1], cache.bbox_sigmoid[2],
              cache.bbox_sigmoid[3]};
  std::array<T, 1> logit{};
  nn::dense_forward<T>(cache.stage1.out, params[hand_w_].data, params[hand_w_ + 1].data, logit);
  out.hand_logit = static_cast<double>(logit[0]);
  out.p_hand = nn::sigmoid(out.hand_logit);

  cache.crop_box = options.crop_box.value_or(out.bbox);
  Crop crop = crop_resize(surface, cache.crop_box, config_.crop_size);
  cache.crop_degenerate = crop.degenerate;
  cache.crop.assign(crop.patch.values.begin(), crop.patch.values.end());
  run_trunk(params, s2_, cache.crop, options.training,
            detail::hash_combine(options.dropout_seed, 2), cache.stage2);

  std::array<T, kGestureSubclasses> logits{};
  nn::dense_forward<T>(cache.stage2.out, params[gesture_w_].data, params[gesture_w_ + 1].data,
                       logits);
  double max_logit = -1e300;
  for (T l : logits) max_logit = std::max(max_logit, static_cast<double>(l));
  double sum = 0.0;
  for (int i = 0; i < kGestureSubclasses; ++i) {
    out.gesture_probs[i] = std::exp(static_cast<double>(logits[i]) - max_logit);
    sum += out.gesture_probs[i];
  }
  for (auto& g : out.gesture_probs) g /= sum;

  out.final_probs[0] = 1.0 - out.p_hand;
  for (int i = 0; i < kGestureSubclasses; ++i) {
    out.final_probs[i + 1] = out.p_hand * out.gesture_probs[i];
  }
  return out;
}

template <typename T>
ModelOutput TwoStageModel<T>::forward(const Params<T>& params, const TimeSurface& surface,
                                      const ForwardOptions& options) const {
  ForwardCache<T> cache;
  return forward(params, surface, options, cache);
}

template <typename T>
void TwoStageModel<T>::backward(const Params<T>& params, const ForwardCache<T>& cache,
                                const Target& target, double gesture_weight, double bbox_weight,
                                Params<T>& grads) const {
  const ModelOutput& out = cache.output;
  const bool hand = target.label != GestureClass::kNoHand;
  const bool clamped = out.final_probs[index_of(target.label)] < kProbabilityFloor;

  // Stage 1 heads.
  std::array<T, 4> d_raw{};
  if (hand && target.bbox) {
    const std::array<double, 4> truth = {target.bbox->cx, target.bbox->cy, target.bbox->w,
                                         target.bbox->h};
    for (int i = 0; i < 4; ++i) {
      const double s = cache.bbox_sigmoid[i];
      d_raw[i] = static_cast<T>(bbox_weight * 2.0 * (s - truth[i]) / 4.0 * s * (1.0 - s));
    }
  }
  std::array<T, 1> d_logit{};
  if (!clamped) d_logit[0] = static_cast<T>(gesture_weight * (out.p_hand - (hand ? 1.0 : 0.0)));

  const std::size_t d1 = cache.stage1.out.size();
  std::vector<T> d_h(d1), d_tmp(d1);
  nn::dense_backward<T>(cache.stage1.out, params[bbox_w_].data, d_raw, grads[bbox_w_].data,
                        grads[bbox_w_ + 1].data, d_h);
  nn::dense_backward<T>(cache.stage1.out, params[hand_w_].data, d_logit, grads[hand_w_].data,
                        grads[hand_w_ + 1].data, d_tmp);
  for (std::size_t i = 0; i < d1; ++i) d_h[i] += d_tmp[i];
  backprop_trunk(params, s1_, cache.stage1, d_h, grads);

  // Stage 2 only receives gesture-loss signal for hand-present labels.
  if (!hand || clamped) return;
  std::array<T, kGestureSubclasses> d_logits{};
  const int label = index_of(target.label) - 1;
  for (int i = 0; i < kGestureSubclasses; ++i) {
    d_logits[i] = static_cast<T>(gesture_weight * (out.gesture_probs[i] - (i == label ? 1.0 : 0.0)));
  }
  std::vector<T> d_h2(cache.stage2.out.size());
  nn::dense_backward<T>(cache.stage2.out, params[gesture_w_].data, d_logits,
                        grads[gesture_w_].data, grads[gesture_w_ + 1].data, d_h2);
  backprop_trunk(params, s2_, cache.stage2, d_h2, grads);
}

template class TwoStageModel<float>;
template class TwoStageModel<double>;

// ---------------------------------------------------------------------------
// Optimizer

template <typename T>
void adam_step(Params<T>& params, const Params<T>& grads, AdamState<T>& state, double lr,
               const AdamConfig& config) {
  if (state.m.size() != params.size()) state = AdamState<T>::zeros_like(params);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      const double vj = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = lr * (mj / c1) / (std::sqrt(vj / c2) + config.epsilon);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
}

template void adam_step<float>(Params<float>&, const Params<float>&, AdamState<float>&, double,
                               const AdamConfig&);
template void adam_step<double>(Params<double>&, const Params<double>&, AdamState<double>&, double,
                                const AdamConfig&);

void TrainConfig::validate() const {
  if (epochs <= 0 || batch_size <= 0) throw ModelConfigError("epochs and batch size must be positive");
  if (!(learning_rate > 0.0)) throw ModelConfigError("learning rate must be positive");
  if (hold_epochs < 0 || hold_epochs >= epochs) throw ModelConfigError("hold epochs must be < epochs");
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw ModelConfigError("final lr fraction must lie in (0, 1]");
  }
  if (!(lambda >= 0.0)) throw ModelConfigError("lambda must be non-negative");
}

double lr_schedule(int epoch, const TrainConfig& config) {
  const double lr0 = config.learning_rate;
  if (epoch <= config.hold_epochs) return lr0;
  const int last = config.epochs - 1;
  if (last <= config.hold_epochs) return lr0;
  const double frac =
      std::min(1.0, static_cast<double>(epoch - config.hold_epochs) / (last - config.hold_epochs));
  return lr0 * (1.0 - frac * (1.0 - config.final_lr_fraction));
}

}  // namespace evg
