// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "evpose/autodiff.hpp"
#include "evpose/event_io.hpp"
#include "evpose/model.hpp"

namespace evpose::pipeline {

enum class SplitKind { kRandom, kNovel };

std::string to_string(SplitKind kind);
SplitKind split_from_string(std::string_view name);

struct TrainConfig {
  model::ModelConfig model;
  double lr = 1e-5;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  std::size_t epochs = 200;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  SplitKind split = SplitKind::kRandom;
  double train_fraction = 0.7;

  bool operator==(const TrainConfig&) const = default;

  /// Throws ConfigError on a violated invariant.
  void validate() const;
};

struct Checkpoint {
  TrainConfig train_config;
  model::ModelParams params;
  ad::OptState optimizer;
  std::size_t epoch = 0;
  std::vector<double> loss_history;  ///< mean training loss per epoch
};

/// Called after every epoch with (epoch starting at 1, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

/// Runs `epochs` passes of seeded shuffled SGD over `windows` with the pose
/// loss. Parameters are initialized from config.seed. Throws NumericError
/// naming the epoch and window if the loss goes non-finite.
Checkpoint train(const TrainConfig& config, std::span<const EventWindow> windows,
                 const EpochCallback& on_epoch = {});

/// Continues training an existing checkpoint for `epochs` more passes.
void train_more(Checkpoint& ckpt, std::span<const EventWindow> windows, std::size_t epochs,
                const EpochCallback& on_epoch = {});

inline constexpr int kCheckpointVersion = 1;

/// Binary container: magic line, little-endian u64 header length, JSON
/// header (version, configs, manifest of names and shapes, loss history),
/// then raw little-endian float64 arrays in manifest order (parameters,
/// then optimizer velocities).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
std::string serialize_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on bad magic, version mismatch, truncation or
/// shape inconsistencies.
Checkpoint load_checkpoint(const std::filesystem::path& path);
Checkpoint deserialize_checkpoint(std::string_view bytes);

// JSON documents for configs. Missing keys keep their defaults.
std::string model_config_to_json(const model::ModelConfig& config);
model::ModelConfig model_config_from_json(std::string_view text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(std::string_view text);

/// Reads `dir/events.txt` and `dir/groundtruth.txt` and windows them.
struct LoadedData {
  std::vector<PoseLabel> poses;
  io::WindowingResult windowing;
  io::ParseStats event_stats;
};
LoadedData load_dataset(const std::filesystem::path& dir, SensorSize sensor);

io::Split make_split(std::span<const EventWindow> windows, SplitKind kind, double fraction,
                     std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace evpose::pipeline
