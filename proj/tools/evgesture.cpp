// Command-line front end: dataset simulation, training, inference,
// benchmarking, evaluation, trials and the demo server.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "evg/checkpoint.hpp"
#include "evg/eval.hpp"
#include "evg/json_io.hpp"
#include "evg/pipeline.hpp"
#include "evg/protocol.hpp"
#include "evg/simulator.hpp"
#include "evg/train.hpp"
#ifdef EVG_HAVE_SERVICE
#include "evg/service.hpp"
#endif

using namespace evg;

namespace {

std::vector<GestureClass> parse_classes(const std::string& list) {
  std::vector<GestureClass> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto c = parse_class(item);
    if (!c) throw CLI::ValidationError("unknown class '" + item + "'");
    out.push_back(*c);
  }
  if (out.empty()) throw CLI::ValidationError("no classes given");
  return out;
}

Timestamp ms_to_us(double ms) { return static_cast<Timestamp>(std::llround(ms * 1000.0)); }

struct WindowOptions {
  double window_ms = 500;
  double stride_ms = 80;

  void add(CLI::App* app) {
    app->add_option("--window-ms", window_ms, "Aggregation window L in ms")->capture_default_str();
    app->add_option("--stride-ms", stride_ms, "Stride between windows in ms")->capture_default_str();
  }
  AggregatorConfig config() const {
    AggregatorConfig c{ms_to_us(window_ms), ms_to_us(stride_ms)};
    if (!c.valid()) throw CLI::ValidationError("need 0 < stride <= window");
    return c;
  }
};

struct PolicyOptions {
  double threshold = 0.7;
  double refractory_ms = 500;

  void add(CLI::App* app) {
    app->add_option("--threshold", threshold, "Probability threshold for every gesture")
        ->capture_default_str();
    app->add_option("--refractory-ms", refractory_ms, "Same-class suppression after a firing")
        ->capture_default_str();
  }
  ThresholdPolicy policy() const { return ThresholdPolicy::uniform(threshold, ms_to_us(refractory_ms)); }
};

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

Timestamp stream_end(const EventStream& s, const AggregatorConfig& a) {
  // Run until the last event has aged out of the window.
  return s.events.empty() ? a.window_length : s.events.back().t + a.window_length;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera microgesture recognition toolkit"};
  app.require_subcommand(1);

  // simulate ---------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Generate a labeled synthetic dataset");
  std::string sim_classes = "nh,hu,sl,sr,r,dp,mp", sim_out;
  int per_class = 100;
  std::uint64_t sim_seed = 1;
  std::uint16_t width = 320, height = 320;
  double contrast = 0.2, sample_rate = 1000, duration = 1.0, split = 0.9, noise_rate = 0,
         refractory_us = 0;
  sim->add_option("--classes", sim_classes, "Comma-separated short or long class names")
      ->capture_default_str();
  sim->add_option("--per-class", per_class, "Samples per class")->capture_default_str();
  sim->add_option("--seed", sim_seed, "Dataset seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--width", width)->capture_default_str();
  sim->add_option("--height", height)->capture_default_str();
  sim->add_option("--contrast", contrast, "Contrast threshold C+ = C-")->capture_default_str();
  sim->add_option("--sample-rate", sample_rate, "Scene sampling rate in Hz")->capture_default_str();
  sim->add_option("--duration", duration, "Seconds per sample")->capture_default_str();
  sim->add_option("--split", split, "Train fraction")->capture_default_str();
  sim->add_option("--noise-rate", noise_rate, "Background events per pixel per second")
      ->capture_default_str();
  sim->add_option("--refractory-us", refractory_us, "Per-pixel refractory period")
      ->capture_default_str();

  // train ------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "Train the two-stage model on a dataset");
  std::string data_dir, model_out, profile = "desk", history_out;
  TrainConfig tc;
  tc.batch_size = 64;
  WindowOptions tr_window;
  tr->add_option("--data", data_dir, "Dataset directory (with manifest.json)")->required();
  tr->add_option("--out", model_out, "Checkpoint path")->required();
  tr->add_option("--epochs", tc.epochs)->capture_default_str();
  tr->add_option("--batch", tc.batch_size)->capture_default_str();
  tr->add_option("--lr", tc.learning_rate)->capture_default_str();
  tr->add_option("--hold", tc.hold_epochs, "Epochs at the initial learning rate")
      ->capture_default_str();
  tr->add_option("--final-lr-fraction", tc.final_lr_fraction)->capture_default_str();
  tr->add_option("--lambda", tc.lambda, "Weight of the box loss")->capture_default_str();
  tr->add_option("--seed", tc.seed)->capture_default_str();
  tr->add_option("--profile", profile, "Model preset")
      ->check(CLI::IsMember({"desk", "tiny", "paper"}))
      ->capture_default_str();
  tr->add_option("--history", history_out, "Write per-epoch metrics as JSON here");
  tr_window.add(tr);

  // infer ------------------------------------------------------------------
  auto* inf = app.add_subcommand("infer", "Run streaming inference over an HEV1 file");
  std::string model_path, input_path;
  bool as_json = false;
  WindowOptions inf_window;
  PolicyOptions inf_policy;
  inf->add_option("--model", model_path)->required();
  inf->add_option("--input", input_path)->required();
  inf->add_flag("--json", as_json, "JSON lines output");
  inf_window.add(inf);
  inf_policy.add(inf);

  // bench ------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "Measure per-stride compute time and latency");
  int reps = 5;
  WindowOptions bench_window;
  bench->add_option("--model", model_path)->required();
  bench->add_option("--input", input_path)->required();
  bench->add_option("--reps", reps)->capture_default_str();
  bench->add_flag("--json", as_json);
  bench_window.add(bench);

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Accuracy and confusion matrix on a dataset split");
  std::string split_name_opt = "val";
  WindowOptions ev_window;
  ev->add_option("--model", model_path)->required();
  ev->add_option("--data", data_dir)->required();
  ev->add_option("--split", split_name_opt)->check(CLI::IsMember({"train", "val"}))->capture_default_str();
  ev->add_flag("--json", as_json);
  ev_window.add(ev);

  // trial ------------------------------------------------------------------
  auto* trial = app.add_subcommand("trial", "Prompted trial with the simulator as performer");
  TrialConfig trial_config;
  std::string trial_gestures = "dp,sl,sr";
  std::uint64_t performer_seed = 1000;
  WindowOptions trial_window;
  PolicyOptions trial_policy;
  trial->add_option("--model", model_path)->required();
  trial->add_option("--reps", trial_config.repetitions)->capture_default_str();
  trial->add_option("--seed", trial_config.seed, "Prompt order seed")->capture_default_str();
  trial->add_option("--gestures", trial_gestures)->capture_default_str();
  trial->add_option("--gap", trial_config.gap_s, "Seconds between prompts")->capture_default_str();
  trial->add_option("--window", trial_config.window_s, "Response window in seconds")
      ->capture_default_str();
  trial->add_option("--performer-seed", performer_seed)->capture_default_str();
  trial->add_flag("--json", as_json);
  trial_window.add(trial);
  trial_policy.add(trial);

  // info -------------------------------------------------------------------
  auto* info = app.add_subcommand("info", "Print a model preset or checkpoint summary as JSON");
  info->add_option("--profile", profile)->check(CLI::IsMember({"desk", "tiny", "paper"}));
  info->add_option("--model", model_path, "Checkpoint to describe instead of a preset");

#ifdef EVG_HAVE_SERVICE
  auto* serve = app.add_subcommand("serve", "Run the HTTP/WebSocket demo server");
  ServiceConfig service_config;
  serve->add_option("--model", model_path)->required();
  serve->add_option("--port", service_config.port)->capture_default_str();
  serve->add_option("--host", service_config.host)->capture_default_str();
  serve->add_option("--threshold", service_config.threshold)->capture_default_str();
  serve->add_option("--idle-timeout", service_config.idle_timeout_s,
                    "Seconds a disconnected session is kept")
      ->capture_default_str();
  serve->add_option("--static-dir", service_config.static_dir, "Serve UI assets from here");
#endif

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      EsimConfig esim;
      esim.contrast_threshold_pos = esim.contrast_threshold_neg = contrast;
      esim.sample_rate = sample_rate;
      esim.noise_rate = noise_rate;
      esim.refractory_period = static_cast<Timestamp>(refractory_us);
      const auto specs = make_scenarios(parse_classes(sim_classes), per_class, {width, height},
                                        sim_seed, duration);
      const auto manifest = build_dataset(specs, esim, split, sim_out);
      std::size_t events = 0;
      for (const auto& e : manifest.entries) events += e.event_count;
      std::cout << "wrote " << manifest.entries.size() << " samples (" << events << " events) to "
                << sim_out << "\n";
    } else if (tr->parsed()) {
      const auto manifest = read_manifest(data_dir);
      const auto model_config = ModelConfig::preset(profile);
      Json history = Json::array();
      const auto start = std::chrono::steady_clock::now();
      const auto result = train(manifest, model_config, tc, tr_window.config(),
                                [&](const EpochMetrics& m) {
                                  std::printf(
                                      "epoch %2d  lr %.6f  train acc %.4f loss %.4f/%.4f  "
                                      "val acc %.4f loss %.4f/%.4f\n",
                                      m.epoch, m.learning_rate, m.train_accuracy,
                                      m.train_gesture_loss, m.train_bbox_loss, m.val_accuracy,
                                      m.val_gesture_loss, m.val_bbox_loss);
                                  std::fflush(stdout);
                                  history.push_back(to_json(m));
                                  return true;
                                });
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      save_checkpoint(model_out, result.params, model_config);
      std::printf("best epoch %d  val acc %.4f  (%.1f s)  -> %s\n", result.best_epoch,
                  result.best_val_accuracy, secs, model_out.c_str());
      if (!history_out.empty()) {
        std::ofstream(history_out) << Json{{"history", history},
                                           {"best_epoch", result.best_epoch},
                                           {"best_val_accuracy", result.best_val_accuracy},
                                           {"seconds", secs}}
                                          .dump(2);
      }
    } else if (inf->parsed()) {
      const auto ck = load_checkpoint(model_path);
      const Model model(ck.config);
      const auto stream = read_hev1(input_path);
      PipelineConfig pc{inf_window.config(), inf_policy.policy()};
      PipelineStats stats;
      const auto detections =
          run_pipeline(model, ck.params, stream, pc, stream_end(stream, pc.aggregator), &stats);
      for (const auto& d : detections) {
        if (as_json) {
          std::cout << to_json(d).dump() << "\n";
        } else {
          std::printf("%10.3f s  %-13s p=%.3f  latency %lld us\n", d.window_end * 1e-6,
                      std::string(class_name(d.gesture)).c_str(), d.probability,
                      static_cast<long long>(d.wall_latency_us));
        }
      }
      if (!as_json) {
        std::printf("%llu windows, %llu detections, %llu events dropped\n",
                    static_cast<unsigned long long>(stats.windows_processed),
                    static_cast<unsigned long long>(stats.detections),
                    static_cast<unsigned long long>(stats.events_dropped));
      }
    } else if (bench->parsed()) {
      const auto ck = load_checkpoint(model_path);
      const Model model(ck.config);
      const auto stream = read_hev1(input_path);
      PipelineConfig pc{bench_window.config(), ThresholdPolicy{}};
      const auto report =
          bench_pipeline(model, ck.params, stream, pc, reps, stream_end(stream, pc.aggregator));
      if (as_json) {
        print_json(to_json(report));
      } else {
        std::printf("strides %zu x %d reps = %zu\n", report.strides_per_run, report.repetitions,
                    report.total_strides);
        std::printf("compute us: mean %.1f p50 %.1f p95 %.1f max %.1f\n", report.compute_us.mean,
                    report.compute_us.p50, report.compute_us.p95, report.compute_us.max);
        std::printf("latency us: mean %.1f p50 %.1f p95 %.1f max %.1f\n", report.latency_us.mean,
                    report.latency_us.p50, report.latency_us.p95, report.latency_us.max);
        std::printf("real-time factor %.1f\n", report.real_time_factor);
      }
    } else if (ev->parsed()) {
      const auto ck = load_checkpoint(model_path);
      const auto manifest = read_manifest(data_dir);
      const Split split = split_name_opt == "train" ? Split::kTrain : Split::kVal;
      const auto result = evaluate_split(ck.params, ck.config, manifest, split, ev_window.config());
      if (as_json) {
        print_json(to_json(result));
      } else {
        std::printf("%s accuracy %.4f over %zu surfaces (loss %.4f / %.4f)\n",
                    split_name_opt.c_str(), result.accuracy, result.surfaces,
                    result.mean_gesture_loss, result.mean_bbox_loss);
        std::printf("true\\pred");
        for (auto c : kAllClasses) std::printf("%6s", std::string(class_short_name(c)).c_str());
        std::printf("\n");
        for (auto c : kAllClasses) {
          std::printf("%9s", std::string(class_short_name(c)).c_str());
          for (auto v : result.matrix.counts[index_of(c)]) {
            std::printf("%6llu", static_cast<unsigned long long>(v));
          }
          std::printf("\n");
        }
      }
    } else if (trial->parsed()) {
      const auto ck = load_checkpoint(model_path);
      const Model model(ck.config);
      trial_config.gestures = parse_classes(trial_gestures);
      PipelineConfig pc{trial_window.config(), trial_policy.policy()};
      const auto performer = simulator_performer(ck.config.input, EsimConfig{}, performer_seed);
      const auto result = run_trial_protocol(model, ck.params, pc, performer, trial_config);
      if (as_json) {
        print_json(to_json(result));
      } else {
        for (const auto& s : result.scores) {
          auto fmt = [](const Proportion& p) {
            char buf[64];
            if (!p.value()) return std::string("undefined");
            std::snprintf(buf, sizeof buf, "%.1f%% +/- %.1f", *p.value() * 100,
                          *p.standard_error() * 100);
            return std::string(buf);
          };
          std::printf("%-13s prompts %2llu hits %2llu fail %2llu timeout %2llu  recall %s  "
                      "precision %s\n",
                      std::string(class_name(s.gesture)).c_str(),
                      static_cast<unsigned long long>(s.prompts),
                      static_cast<unsigned long long>(s.hits),
                      static_cast<unsigned long long>(s.failures),
                      static_cast<unsigned long long>(s.timeouts), fmt(s.recall).c_str(),
                      fmt(s.precision).c_str());
        }
        std::printf("gap detections: %zu\n", result.gap_detections.size());
      }
    } else if (info->parsed()) {
      const ModelConfig config =
          model_path.empty() ? ModelConfig::preset(profile) : load_checkpoint(model_path).config;
      print_json(model_info(config));
#ifdef EVG_HAVE_SERVICE
    } else if (serve->parsed()) {
      const auto ck = load_checkpoint(model_path);
      service_config.model_name = std::filesystem::path(model_path).stem().string();
      run_service(ck, service_config);
#endif
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
