// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: convert, synth, train, eval, robustness, fetch.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "evpose/error.hpp"
#include "evpose/eval.hpp"
#include "evpose/event_image.hpp"
#include "evpose/event_io.hpp"
#include "evpose/pipeline.hpp"
#include "evpose/synth.hpp"
#include "fetch.hpp"

namespace fs = std::filesystem;
using namespace evpose;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

SensorSize sensor_of(const model::ModelConfig& c) {
  return {static_cast<int>(c.input_w), static_cast<int>(c.input_h)};
}

void run_convert(const fs::path& events_path, const fs::path& poses_path, const fs::path& out,
                 double fraction, SensorSize sensor) {
  std::ifstream gt(poses_path);
  if (!gt) throw DataError("cannot open " + poses_path.string());
  const auto poses = io::parse_poses(gt);
  std::ifstream ev(events_path);
  if (!ev) throw DataError("cannot open " + events_path.string());
  io::ParseStats stats;
  const auto events = io::parse_events(ev, sensor, &stats);
  if (stats.non_monotone > 0) {
    std::cerr << "warning: " << stats.non_monotone << " events out of timestamp order\n";
  }
  const auto windowing = io::window_events(events, poses);

  fs::create_directories(out);
  std::ofstream index(out / "index.csv");
  index << "file,sequence_index,t,px,py,pz,qx,qy,qz,qw,events,fraction\n";
  for (const EventWindow& w : windowing.windows) {
    const EventImage img = image::build_window_image(w, sensor, fraction);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06zu.pgm", w.sequence_index);
    std::ofstream pgm(out / name);
    image::write_pgm(pgm, img);
    index << name << ',' << w.sequence_index << ',' << io::format_real(w.label.t);
    for (double v : w.label.p) index << ',' << io::format_real(v);
    for (double v : w.label.q) index << ',' << io::format_real(v);
    index << ',' << image::select_fraction(w, fraction).size() << ','
          << io::format_real(fraction) << '\n';
  }
  std::cout << windowing.windows.size() << " images written to " << out.string() << " ("
            << windowing.skipped_empty << " empty intervals skipped, "
            << windowing.discarded_events << " events outside groundtruth)\n";
}

void run_synth(const std::string& config_path, const fs::path& out) {
  const synth::SceneConfig scene =
      config_path.empty() ? synth::SceneConfig::default_scene()
                          : synth::scene_from_json(pipeline::read_file(config_path));
  const synth::Dataset data = synth::generate_dataset(scene);
  pipeline::write_file(out / "events.txt", data.events_text);
  pipeline::write_file(out / "groundtruth.txt", data.groundtruth_text);
  pipeline::write_file(out / "scene.json", synth::scene_to_json(scene) + "\n");
  std::cout << data.poses.size() << " poses, " << data.events.size() << " events written to "
            << out.string() << "\n";
}

void run_train(const fs::path& data_dir, const std::string& config_path, const fs::path& out,
               int epochs_override) {
  pipeline::TrainConfig cfg;
  if (!config_path.empty()) cfg = pipeline::train_config_from_json(pipeline::read_file(config_path));
  if (epochs_override > 0) cfg.epochs = static_cast<std::size_t>(epochs_override);
  const auto data = pipeline::load_dataset(data_dir, sensor_of(cfg.model));
  const auto& windows = data.windowing.windows;
  const io::Split split = pipeline::make_split(windows, cfg.split, cfg.train_fraction, cfg.seed);
  std::cout << windows.size() << " windows (" << split.train.size() << " train, "
            << split.test.size() << " test, " << pipeline::to_string(cfg.split) << " split)\n";

  const std::size_t every = std::max<std::size_t>(1, cfg.epochs / 20);
  const auto ckpt = pipeline::train(cfg, split.train, [&](std::size_t epoch, double loss) {
    if (epoch == 1 || epoch % every == 0 || epoch == cfg.epochs) {
      std::cout << "epoch " << epoch << " loss " << loss << std::endl;
    }
  });
  pipeline::save_checkpoint(ckpt, out);

  std::ostringstream log;
  log << "epoch,loss\n";
  for (std::size_t i = 0; i < ckpt.loss_history.size(); ++i) {
    log << i + 1 << ',' << io::format_real(ckpt.loss_history[i]) << '\n';
  }
  fs::path log_path = out;
  log_path += ".loss.csv";
  pipeline::write_file(log_path, log.str());
  std::cout << "checkpoint written to " << out.string() << "\n";
}

// Test windows of the split recorded in the checkpoint unless overridden.
std::vector<EventWindow> test_windows(const pipeline::Checkpoint& ckpt, const fs::path& data_dir,
                                      const std::string& split_name, long long seed) {
  const auto data = pipeline::load_dataset(data_dir, sensor_of(ckpt.params.config));
  const auto kind =
      split_name.empty() ? ckpt.train_config.split : pipeline::split_from_string(split_name);
  const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : ckpt.train_config.seed;
  return pipeline::make_split(data.windowing.windows, kind, ckpt.train_config.train_fraction, s)
      .test;
}

void run_eval(const fs::path& ckpt_path, const fs::path& data_dir, const std::string& split,
              long long seed, const fs::path& out) {
  const auto ckpt = pipeline::load_checkpoint(ckpt_path);
  const auto windows = test_windows(ckpt, data_dir, split, seed);
  const auto report = eval::evaluate(ckpt.params, windows);

  // Write the requested file plus its sibling in the other format.
  fs::path json_path = out, csv_path = out;
  if (out.extension() == ".csv") {
    json_path.replace_extension(".json");
  } else {
    csv_path.replace_extension(".csv");
  }
  std::ostringstream js, csv;
  eval::write_report_json(js, report);
  eval::write_report_csv(csv, report);
  pipeline::write_file(json_path, js.str());
  pipeline::write_file(csv_path, csv.str());
  std::cout << "n=" << report.position.n << " position median " << report.position.median
            << " m, mean " << report.position.mean << " m; orientation median "
            << report.orientation.median << " deg, mean " << report.orientation.mean << " deg\n";
}

void run_robustness(const fs::path& ckpt_path, const fs::path& data_dir,
                    const std::string& split, long long seed, const fs::path& out) {
  const auto ckpt = pipeline::load_checkpoint(ckpt_path);
  const auto windows = test_windows(ckpt, data_dir, split, seed);
  const auto fractions = eval::default_fractions();
  const auto table = eval::robustness_experiment(ckpt.params, windows, fractions);
  std::ostringstream csv;
  eval::write_robustness_csv(csv, table);
  pipeline::write_file(out, csv.str());
  std::cout << csv.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera pose relocalization with a stacked spatial LSTM"};
  app.require_subcommand(1);

  auto* convert = app.add_subcommand("convert", "Write event images (PGM) and an index CSV");
  std::string events_path, poses_path, out_dir;
  double fraction = 1.0;
  int width = 240, height = 180;
  convert->add_option("--events", events_path, "events file (t x y p)")->required();
  convert->add_option("--poses", poses_path, "groundtruth file (t px py pz qx qy qz qw)")->required();
  convert->add_option("--out", out_dir, "output directory")->required();
  convert->add_option("--fraction", fraction, "newest fraction of events per window")
      ->check(CLI::Range(0.0, 1.0));
  convert->add_option("--width", width, "sensor width")->check(CLI::PositiveNumber);
  convert->add_option("--height", height, "sensor height")->check(CLI::PositiveNumber);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  std::string scene_config;
  synth_cmd->add_option("--config", scene_config, "scene JSON (default scene if omitted)");
  synth_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string data_dir, train_config, out_path;
  int epochs = 0;
  train_cmd->add_option("--data", data_dir, "directory with events.txt and groundtruth.txt")->required();
  train_cmd->add_option("--config", train_config, "training JSON (defaults if omitted)");
  train_cmd->add_option("--out", out_path, "checkpoint path")->required();
  train_cmd->add_option("--epochs", epochs, "override the configured epoch count");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
  std::string ckpt_path, split;
  long long seed = -1;
  eval_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
  eval_cmd->add_option("--split", split, "random or novel (default: as trained)")
      ->check(CLI::IsMember({"random", "novel"}));
  eval_cmd->add_option("--seed", seed, "split seed (default: as trained)");
  eval_cmd->add_option("--out", out_path, "report path (.json or .csv; both are written)")->required();

  auto* robust_cmd = app.add_subcommand("robustness", "Error versus fraction of events used");
  robust_cmd->add_option("--ckpt", ckpt_path, "checkpoint")->required();
  robust_cmd->add_option("--data", data_dir, "dataset directory")->required();
  robust_cmd->add_option("--split", split, "random or novel (default: as trained)")
      ->check(CLI::IsMember({"random", "novel"}));
  robust_cmd->add_option("--seed", seed, "split seed (default: as trained)");
  robust_cmd->add_option("--out", out_path, "table CSV")->required();

  auto* fetch_cmd = app.add_subcommand("fetch", "Download dataset files listed in a manifest");
  std::string manifest;
  fetch_cmd->add_option("--manifest", manifest, "manifest JSON")->required();
  fetch_cmd->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*convert) {
      run_convert(events_path, poses_path, out_dir, fraction, {width, height});
    } else if (*synth_cmd) {
      run_synth(scene_config, out_dir);
    } else if (*train_cmd) {
      run_train(data_dir, train_config, out_path, epochs);
    } else if (*eval_cmd) {
      run_eval(ckpt_path, data_dir, split, seed, out_path);
    } else if (*robust_cmd) {
      run_robustness(ckpt_path, data_dir, split, seed, out_path);
    } else if (*fetch_cmd) {
      fetch::fetch_all(fetch::parse_manifest(pipeline::read_file(manifest)), out_dir);
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
