// corrtrack: train, track, evaluate and self-check from the command line.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <exception>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <memory>

#include "corrtrack/checks.hpp"
#include "corrtrack/evalkit.hpp"
#include "corrtrack/runtime.hpp"
#include "corrtrack/training.hpp"

namespace fs = std::filesystem;
using namespace corrtrack;

namespace {

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out;
  std::size_t synthetic_count = 20;
  std::uint64_t synthetic_seed = 11;
};

struct TrackArgs {
  std::string model;
  std::string sequence;
  std::string out;
  std::string init;
  bool fps_report = false;
};

struct EvalArgs {
  std::vector<std::string> traj;
  std::vector<std::string> sequence;
  std::string out;
};

struct SynthArgs {
  std::string out;
  std::size_t count = 1;
  std::uint64_t seed = 1;
  std::size_t length = 20;
};

std::vector<Clip> load_training_clips(const std::string& data, const TrainArgs& args) {
  if (data == "synthetic") return make_synthetic_dataset(args.synthetic_count, args.synthetic_seed);
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(data)) {
    if (e.is_directory() && fs::exists(e.path() / "groundtruth_rect.txt")) dirs.push_back(e.path());
  }
  if (dirs.empty() && fs::exists(fs::path(data) / "groundtruth_rect.txt")) dirs.emplace_back(data);
  if (dirs.empty()) throw std::runtime_error("no annotated sequences under " + data);
  std::sort(dirs.begin(), dirs.end());
  std::vector<Clip> clips;
  for (const auto& d : dirs) {
    const Sequence seq = load_sequence(d);
    if (!seq.has_ground_truth()) continue;
    Clip clip;
    for (const auto& f : seq.frames) clip.frames.push_back(load_frame(f));
    clip.boxes = seq.ground_truth;
    clips.push_back(std::move(clip));
  }
  return clips;
}

int run_train(const TrainArgs& args) {
  const TrainConfig cfg = args.config.empty() ? TrainConfig{} : load_train_config(args.config);
  const std::vector<Clip> clips = load_training_clips(args.data, args);
  NetworkParams model = init_network(cfg.arch, cfg.optimizer.seed);
  const auto pairs = select_pairs(clips, cfg);
  std::printf("training %s on %zu sequences, %zu pairs, %zu epochs\n",
              std::string(architecture_name(cfg.arch)).c_str(), clips.size(), pairs.size(),
              cfg.optimizer.epochs);
  train_model(model, clips, cfg, [](std::size_t epoch, double loss) {
    std::printf("epoch %zu loss %.6g\n", epoch + 1, loss);
    std::fflush(stdout);
  });
  save_model(model, args.out);
  std::printf("wrote %s\n", args.out.c_str());
  return 0;
}

int run_track(const TrackArgs& args) {
  auto model = std::make_shared<const NetworkParams>(load_model(args.model));
  const Sequence seq = load_sequence(args.sequence);
  std::optional<BoundingBox> initial;
  if (!args.init.empty()) initial = parse_box_line(args.init, 1);
  HyperParams params;
  const TrackRun run = run_tracker(seq, model, params, initial);
  write_boxes(args.out, run.trajectory);
  if (args.fps_report) {
    std::printf("steady-state fps: %.2f (%zu frames, %s, input %zu, %d scales)\n", run.steady_fps,
                seq.frames.size(), std::string(architecture_name(model->arch)).c_str(),
                params.input_size, params.scale_levels);
  }
  return 0;
}

int run_eval(const EvalArgs& args) {
  if (args.traj.size() != args.sequence.size()) {
    throw std::invalid_argument("eval: " + std::to_string(args.traj.size()) + " trajectories but " +
                                std::to_string(args.sequence.size()) + " sequences");
  }
  const std::size_t n = args.traj.size();
  std::vector<EvalResult> results(n);
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const Sequence seq = load_sequence(args.sequence[i]);
      if (!seq.has_ground_truth()) throw std::runtime_error(args.sequence[i] + " has no ground truth");
      results[i] = evaluate(read_boxes(args.traj[i]), seq.ground_truth);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  nlohmann::ordered_json per_sequence = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
    auto j = nlohmann::ordered_json::parse(to_json(results[i]));
    j["sequence"] = args.sequence[i];
    per_sequence.push_back(std::move(j));
  }
  std::string text;
  if (results.size() == 1) {
    text = to_json(results.front());
  } else {
    nlohmann::ordered_json j = nlohmann::ordered_json::parse(to_json(mean_result(results)));
    j["sequences"] = per_sequence;
    text = j.dump(2);
  }
  if (args.out.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream out(args.out);
    if (!out) throw std::runtime_error("cannot write " + args.out);
    out << text << '\n';
  }
  const EvalResult m = mean_result(results);
  std::printf("OP %.4f  DP %.4f  CLE %.3f  AUC %.4f\n", m.op, m.dp, m.cle, m.auc);
  return 0;
}

int report_checks(const std::vector<checks::CheckResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s\n", checks::format_result(r).c_str());
    ok = ok && r.pass();
  }
  return ok ? 0 : 1;
}

int run_gradcheck(std::uint64_t seed) {
  const auto results = checks::gradcheck_suite(seed);
  double worst = 0.0;
  for (const auto& r : results) worst = std::max(worst, r.value);
  const int status = report_checks(results);
  std::printf("max relative error: %.3e\n", worst);
  return status;
}

int run_synth(const SynthArgs& args) {
  SyntheticConfig cfg;
  cfg.length = args.length;
  const auto clips = make_synthetic_dataset(args.count, args.seed, cfg);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const fs::path dir = args.count == 1 ? fs::path(args.out) : fs::path(args.out) / ("seq" + std::to_string(i + 1));
    write_sequence(dir, clips[i]);
  }
  std::printf("wrote %zu sequences to %s\n", clips.size(), args.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"corrtrack: correlation-filter tracker with learned features"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a feature extractor end to end");
  train_cmd->add_option("--data", train.data, "Directory of annotated sequences, or 'synthetic'")->required();
  train_cmd->add_option("--config", train.config, "Training config (key = value)");
  train_cmd->add_option("--out", train.out, "Output model file")->required();
  train_cmd->add_option("--synthetic-count", train.synthetic_count, "Sequences generated for --data synthetic");
  train_cmd->add_option("--synthetic-seed", train.synthetic_seed, "Seed for --data synthetic");

  TrackArgs track;
  auto* track_cmd = app.add_subcommand("track", "Track the target through a sequence");
  track_cmd->add_option("--model", track.model, "Model file")->required();
  track_cmd->add_option("--sequence", track.sequence, "Sequence directory")->required();
  track_cmd->add_option("--out", track.out, "Trajectory output (x,y,w,h per line)")->required();
  track_cmd->add_option("--init", track.init, "Initial box x,y,w,h (default: first ground-truth box)");
  track_cmd->add_flag("--fps-report", track.fps_report, "Print steady-state frames per second");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score trajectories against ground truth");
  eval_cmd->add_option("--traj", eval.traj, "Trajectory file (repeatable)")->required();
  eval_cmd->add_option("--sequence", eval.sequence, "Sequence directory (repeatable)")->required();
  eval_cmd->add_option("--out", eval.out, "Metrics JSON (default: stdout)");

  std::uint64_t grad_seed = 1;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference suite for every backward pass");
  grad_cmd->add_option("--seed", grad_seed, "Random seed");

  std::uint64_t self_seed = 1;
  auto* self_cmd = app.add_subcommand("selftest", "Oracle-equivalence suite");
  self_cmd->add_option("--seed", self_seed, "Random seed");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic sequences in the sequence layout");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of sequences");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--length", synth.length, "Frames per sequence");

  CLI11_PARSE(app, argc, argv);
  keep_heap_resident();

  try {
    if (*train_cmd) return run_train(train);
    if (*track_cmd) return run_track(track);
    if (*eval_cmd) return run_eval(eval);
    if (*grad_cmd) return run_gradcheck(grad_seed);
    if (*self_cmd) return report_checks(checks::selftest_suite(self_seed));
    if (*synth_cmd) return run_synth(synth);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "corrtrack: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
