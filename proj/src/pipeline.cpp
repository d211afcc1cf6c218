// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/pipeline.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "evpose/error.hpp"
#include "evpose/event_image.hpp"
#include "evpose/rng.hpp"

namespace evpose::pipeline {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "evpose-checkpoint\n";

json model_json(const model::ModelConfig& c) {
  json blocks = json::array();
  for (const auto& b : c.conv_blocks) {
    blocks.push_back({{"out_channels", b.out_channels},
                      {"kernel", b.kernel},
                      {"stride", b.stride},
                      {"pool", b.pool}});
  }
  return {{"input_h", c.input_h},         {"input_w", c.input_w},
          {"conv_blocks", blocks},        {"feature_dim", c.feature_dim},
          {"lstm_hidden", c.lstm_hidden}, {"lstm_layers", c.lstm_layers},
          {"fc_hidden", c.fc_hidden},     {"dropout_rate", c.dropout_rate}};
}

model::ModelConfig model_from(const json& j) {
  model::ModelConfig c;
  c.input_h = j.value("input_h", c.input_h);
  c.input_w = j.value("input_w", c.input_w);
  if (j.contains("conv_blocks")) {
    c.conv_blocks.clear();
    for (const auto& b : j.at("conv_blocks")) {
      model::ConvBlock block;
      block.out_channels = b.value("out_channels", block.out_channels);
      block.kernel = b.value("kernel", block.kernel);
      block.stride = b.value("stride", block.stride);
      block.pool = b.value("pool", block.pool);
      c.conv_blocks.push_back(block);
    }
  }
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.validate();
  return c;
}

json train_json(const TrainConfig& c) {
  return {{"model", model_json(c.model)},       {"lr", c.lr},
          {"momentum", c.momentum},             {"weight_decay", c.weight_decay},
          {"epochs", c.epochs},                 {"batch_size", c.batch_size},
          {"seed", c.seed},                     {"split", to_string(c.split)},
          {"train_fraction", c.train_fraction}};
}

TrainConfig train_from(const json& j) {
  TrainConfig c;
  if (j.contains("model")) c.model = model_from(j.at("model"));
  c.lr = j.value("lr", c.lr);
  c.momentum = j.value("momentum", c.momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("split")) c.split = split_from_string(j.at("split").get<std::string>());
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  c.validate();
  return c;
}

template <typename Fn>
auto parse_config(std::string_view text, const char* what, Fn&& fn) {
  try {
    return fn(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

void append_f64(std::string& out, std::span<const double> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      out[start + i * 8 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
  }
}

std::uint64_t read_u64(std::string_view bytes, std::size_t offset) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + b])) << (8 * b);
  }
  return v;
}

std::vector<double> read_f64(std::string_view bytes, std::size_t offset, std::size_t count) {
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) v[i] = std::bit_cast<double>(read_u64(bytes, offset + 8 * i));
  return v;
}

void run_epochs(Checkpoint& ckpt, std::span<const EventWindow> windows, std::size_t epochs,
                const EpochCallback& on_epoch) {
  if (windows.empty()) throw InsufficientDataError("train: empty training set");
  const TrainConfig& cfg = ckpt.train_config;
  const SensorSize sensor{static_cast<int>(cfg.model.input_w),
                          static_cast<int>(cfg.model.input_h)};
  std::vector<EventImage> images;
  images.reserve(windows.size());
  for (const EventWindow& w : windows) images.push_back(image::build_window_image(w, sensor));

  std::vector<ad::Tensor> params = ckpt.params.tensors();
  const std::size_t n = windows.size();
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  std::vector<std::size_t> order(n);

  for (std::size_t e = 0; e < epochs; ++e) {
    const std::size_t epoch = ckpt.epoch + 1;
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(epoch_seed);
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double total = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<ad::Tensor> losses;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto where = [&] {
          return "epoch " + std::to_string(epoch) + ", window " +
                 std::to_string(windows[idx].sequence_index);
        };
        try {
          const ad::Tensor out =
              model::forward(images[idx], ckpt.params, true, mix_seed(epoch_seed, k));
          ad::Tensor loss = model::pose_loss(out, windows[idx].label);
          if (!std::isfinite(loss.item())) throw NumericError("non-finite loss");
          total += loss.item();
          losses.push_back(ad::reshape(loss, {1}));
        } catch (const NumericError& err) {
          throw NumericError("train: " + where() + ": " + err.what());
        }
      }
      const ad::Tensor objective = losses.size() == 1 ? losses[0] : ad::mean(ad::concat(losses));
      const ad::Gradients grads = ad::backward(objective);
      try {
        ad::sgd_step(params, grads, ckpt.optimizer);
      } catch (const NumericError& err) {
        throw NumericError("train: epoch " + std::to_string(epoch) + ": " + err.what());
      }
    }
    const double mean_loss = total / static_cast<double>(n);
    ckpt.loss_history.push_back(mean_loss);
    ckpt.epoch = epoch;
    if (on_epoch) on_epoch(epoch, mean_loss);
  }
}

}  // namespace

std::string to_string(SplitKind kind) { return kind == SplitKind::kNovel ? "novel" : "random"; }

SplitKind split_from_string(std::string_view name) {
  if (name == "random") return SplitKind::kRandom;
  if (name == "novel") return SplitKind::kNovel;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected random or novel)");
}

void TrainConfig::validate() const {
  model.validate();
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (!(lr >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw ConfigError("lr, momentum and weight_decay must be non-negative");
  }
}

Checkpoint train(const TrainConfig& config, std::span<const EventWindow> windows,
                 const EpochCallback& on_epoch) {
  config.validate();
  Checkpoint ckpt;
  ckpt.train_config = config;
  ckpt.params = model::init_params(config.model, config.seed);
  const std::vector<ad::Tensor> params = ckpt.params.tensors();
  ckpt.optimizer = ad::make_opt_state(params, config.lr, config.momentum, config.weight_decay);
  run_epochs(ckpt, windows, config.epochs, on_epoch);
  return ckpt;
}

void train_more(Checkpoint& ckpt, std::span<const EventWindow> windows, std::size_t epochs,
                const EpochCallback& on_epoch) {
  run_epochs(ckpt, windows, epochs, on_epoch);
}

// --- checkpoints --------------------------------------------------------------

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const std::vector<ad::Tensor> params = ckpt.params.tensors();
  const std::vector<std::string> names = ckpt.params.names();
  json manifest = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    manifest.push_back({{"name", names[i]}, {"shape", params[i].shape()}});
  }
  const json header = {
      {"format_version", kCheckpointVersion},
      {"train_config", train_json(ckpt.train_config)},
      {"model", model_json(ckpt.params.config)},
      {"optimizer",
       {{"lr", ckpt.optimizer.lr},
        {"momentum", ckpt.optimizer.momentum},
        {"weight_decay", ckpt.optimizer.weight_decay},
        {"velocity_count", ckpt.optimizer.velocity.size()}}},
      {"epoch", ckpt.epoch},
      {"loss_history", ckpt.loss_history},
      {"manifest", manifest},
  };
  const std::string text = header.dump();

  std::string out(kMagic);
  const std::size_t len_at = out.size();
  out.resize(len_at + 8);
  for (int b = 0; b < 8; ++b) {
    out[len_at + b] = static_cast<char>((static_cast<std::uint64_t>(text.size()) >> (8 * b)) & 0xff);
  }
  out += text;
  for (const ad::Tensor& p : params) append_f64(out, p.data());
  for (const auto& v : ckpt.optimizer.velocity) append_f64(out, v);
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw CheckpointError("checkpoint: bad magic");
  std::size_t pos = kMagic.size();
  if (bytes.size() < pos + 8) throw CheckpointError("checkpoint: truncated header length");
  const std::uint64_t header_len = read_u64(bytes, pos);
  pos += 8;
  if (header_len > bytes.size() - pos) throw CheckpointError("checkpoint: truncated header");

  json header;
  try {
    header = json::parse(bytes.substr(pos, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: unreadable header: ") + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  try {
    const int version = header.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: format version " + std::to_string(version) +
                            ", this build reads " + std::to_string(kCheckpointVersion));
    }
    ckpt.train_config = train_from(header.at("train_config"));
    const model::ModelConfig config = model_from(header.at("model"));
    const auto& opt = header.at("optimizer");
    ckpt.epoch = header.at("epoch").get<std::size_t>();
    ckpt.loss_history = header.at("loss_history").get<std::vector<double>>();

    std::vector<ad::Tensor> tensors;
    for (const auto& entry : header.at("manifest")) {
      const ad::Shape shape = entry.at("shape").get<ad::Shape>();
      const std::size_t count = ad::shape_size(shape);
      if (count > (bytes.size() - pos) / 8) throw CheckpointError("checkpoint: truncated arrays");
      tensors.push_back(ad::Tensor::parameter(shape, read_f64(bytes, pos, count)));
      pos += count * 8;
    }
    try {
      ckpt.params = model::ModelParams::from_tensors(config, std::move(tensors));
    } catch (const ShapeError& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    }

    ckpt.optimizer.lr = opt.at("lr").get<double>();
    ckpt.optimizer.momentum = opt.at("momentum").get<double>();
    ckpt.optimizer.weight_decay = opt.at("weight_decay").get<double>();
    const std::size_t velocity_count = opt.at("velocity_count").get<std::size_t>();
    const std::vector<ad::Tensor> params = ckpt.params.tensors();
    if (velocity_count != 0 && velocity_count != params.size()) {
      throw CheckpointError("checkpoint: optimizer state does not match parameters");
    }
    for (std::size_t i = 0; i < velocity_count; ++i) {
      const std::size_t count = params[i].size();
      if (count > (bytes.size() - pos) / 8) throw CheckpointError("checkpoint: truncated arrays");
      ckpt.optimizer.velocity.push_back(read_f64(bytes, pos, count));
      pos += count * 8;
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("checkpoint: malformed header: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  if (pos != bytes.size()) throw CheckpointError("checkpoint: trailing bytes after arrays");
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

// --- configs ------------------------------------------------------------------

std::string model_config_to_json(const model::ModelConfig& config) {
  return model_json(config).dump(2);
}

model::ModelConfig model_config_from_json(std::string_view text) {
  return parse_config(text, "model config", model_from);
}

std::string train_config_to_json(const TrainConfig& config) { return train_json(config).dump(2); }

TrainConfig train_config_from_json(std::string_view text) {
  return parse_config(text, "train config", train_from);
}

// --- data -----------------------------------------------------------------------

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

LoadedData load_dataset(const std::filesystem::path& dir, SensorSize sensor) {
  LoadedData data;
  std::ifstream gt(dir / "groundtruth.txt");
  if (!gt) throw DataError("cannot open " + (dir / "groundtruth.txt").string());
  data.poses = io::parse_poses(gt);
  std::ifstream ev(dir / "events.txt");
  if (!ev) throw DataError("cannot open " + (dir / "events.txt").string());
  const std::vector<Event> events = io::parse_events(ev, sensor, &data.event_stats);
  data.windowing = io::window_events(events, data.poses);
  return data;
}

io::Split make_split(std::span<const EventWindow> windows, SplitKind kind, double fraction,
                     std::uint64_t seed) {
  return kind == SplitKind::kNovel ? io::split_novel(windows, fraction)
                                   : io::split_random(windows, fraction, seed);
}

}  // namespace evpose::pipeline
