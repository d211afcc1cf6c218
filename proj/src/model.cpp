// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/model.hpp"

#include <cmath>

#include "evpose/error.hpp"
#include "evpose/rng.hpp"

namespace evpose::model {
namespace {

std::size_t integer_sqrt(std::size_t n) {
  auto s = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (s * s > n) --s;
  while ((s + 1) * (s + 1) <= n) ++s;
  return s;
}

Tensor glorot(Rng& rng, ad::Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(ad::shape_size(shape));
  for (double& v : data) v = rng.uniform(-a, a);
  return Tensor::parameter(std::move(shape), std::move(data));
}

Tensor zeros(ad::Shape shape) {
  const std::size_t n = ad::shape_size(shape);
  return Tensor::parameter(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor affine(const Tensor& w, const Tensor& x, const Tensor& b) {
  return ad::add(ad::matmul(w, x), b);
}

Tensor gate(const Tensor& wx, const Tensor& wh, const Tensor& b, const Tensor& x,
            const Tensor& h) {
  return ad::add(ad::add(ad::matmul(wx, x), ad::matmul(wh, h)), b);
}

// Canonical parameter order with shapes; shared by init, names and loading.
struct Slot {
  std::string name;
  ad::Shape shape;
  std::size_t fan_in = 0;
  std::size_t fan_out = 0;
  bool bias = false;
};

std::vector<Slot> layout(const ModelConfig& cfg) {
  std::vector<Slot> slots;
  std::size_t channels = 1;
  for (std::size_t i = 0; i < cfg.conv_blocks.size(); ++i) {
    const ConvBlock& b = cfg.conv_blocks[i];
    const std::string p = "conv." + std::to_string(i);
    slots.push_back({p + ".weight", {b.out_channels, channels, b.kernel, b.kernel},
                     channels * b.kernel * b.kernel, b.out_channels * b.kernel * b.kernel});
    slots.push_back({p + ".bias", {b.out_channels}, 0, 0, true});
    channels = b.out_channels;
  }
  const std::size_t flat = ad::shape_size(cfg.conv_output_shape());
  const std::size_t F = cfg.feature_dim;
  slots.push_back({"feature.weight", {F, flat}, flat, F});
  slots.push_back({"feature.bias", {F, 1}, 0, 0, true});

  const std::size_t H = cfg.lstm_hidden;
  for (std::size_t l = 0; l < cfg.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? cfg.feature_side() : H;
    const std::string p = "lstm." + std::to_string(l) + ".";
    for (const char* g : {"i", "f", "o", "g"}) slots.push_back({p + "wx_" + g, {H, in}, in, H});
    for (const char* g : {"i", "f", "o", "g"}) slots.push_back({p + "wh_" + g, {H, H}, H, H});
    for (const char* g : {"i", "f", "o", "g"}) slots.push_back({p + "b_" + g, {H, 1}, 0, 0, true});
  }
  slots.push_back({"fc1.weight", {cfg.fc_hidden, H}, H, cfg.fc_hidden});
  slots.push_back({"fc1.bias", {cfg.fc_hidden, 1}, 0, 0, true});
  slots.push_back({"fc2.weight", {7, cfg.fc_hidden}, cfg.fc_hidden, 7});
  slots.push_back({"fc2.bias", {7, 1}, 0, 0, true});
  return slots;
}

}  // namespace

// --- config -----------------------------------------------------------------

std::size_t ModelConfig::feature_side() const { return integer_sqrt(feature_dim); }

ad::Shape ModelConfig::conv_output_shape() const {
  std::size_t c = 1, h = input_h, w = input_w;
  for (const ConvBlock& b : conv_blocks) {
    const std::size_t pad = b.kernel / 2;
    if (b.stride == 0 || h + 2 * pad < b.kernel || w + 2 * pad < b.kernel) return {0, 0, 0};
    h = (h + 2 * pad - b.kernel) / b.stride + 1;
    w = (w + 2 * pad - b.kernel) / b.stride + 1;
    if (b.pool > 1) {
      h /= b.pool;
      w /= b.pool;
    }
    c = b.out_channels;
  }
  return {c, h, w};
}

void ModelConfig::validate() const {
  if (input_h == 0 || input_w == 0) throw ConfigError("input size must be positive");
  for (const ConvBlock& b : conv_blocks) {
    if (b.out_channels == 0 || b.kernel == 0 || b.stride == 0 || b.pool == 0) {
      throw ConfigError("conv block fields must be positive");
    }
  }
  if (ad::shape_size(conv_output_shape()) == 0) {
    throw ConfigError("conv blocks reduce a " + std::to_string(input_h) + "x" +
                      std::to_string(input_w) + " input to nothing");
  }
  const std::size_t s = feature_side();
  if (feature_dim == 0 || s * s != feature_dim) {
    throw ConfigError("feature_dim " + std::to_string(feature_dim) + " is not a perfect square");
  }
  if (lstm_layers < 1) throw ConfigError("lstm_layers must be at least 1");
  if (lstm_hidden == 0 || fc_hidden == 0) throw ConfigError("layer widths must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.input_h = 8;
  c.input_w = 8;
  c.conv_blocks = {{2, 3, 1, 2}};
  c.feature_dim = 16;
  c.lstm_hidden = 8;
  c.lstm_layers = 2;
  c.fc_hidden = 8;
  return c;
}

// --- parameters -------------------------------------------------------------

LstmState LstmState::zeros(std::size_t hidden) {
  return {Tensor::constant({hidden, 1}, 0.0), Tensor::constant({hidden, 1}, 0.0)};
}

std::vector<Tensor> ModelParams::tensors() const {
  std::vector<Tensor> out;
  for (const ConvParams& c : conv) {
    out.push_back(c.weight);
    out.push_back(c.bias);
  }
  out.push_back(feature_w);
  out.push_back(feature_b);
  for (const LstmParams& l : lstm) {
    for (const Tensor* t : {&l.wx_i, &l.wx_f, &l.wx_o, &l.wx_g, &l.wh_i, &l.wh_f, &l.wh_o,
                            &l.wh_g, &l.b_i, &l.b_f, &l.b_o, &l.b_g}) {
      out.push_back(*t);
    }
  }
  out.push_back(fc1_w);
  out.push_back(fc1_b);
  out.push_back(fc2_w);
  out.push_back(fc2_b);
  return out;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for (const Slot& s : layout(config)) out.push_back(s.name);
  return out;
}

ModelParams ModelParams::from_tensors(const ModelConfig& config, std::vector<Tensor> tensors) {
  config.validate();
  const std::vector<Slot> slots = layout(config);
  if (tensors.size() != slots.size()) {
    throw ShapeError("model expects " + std::to_string(slots.size()) + " tensors, got " +
                     std::to_string(tensors.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (tensors[i].shape() != slots[i].shape) {
      throw ShapeError(slots[i].name + ": expected " + ad::shape_string(slots[i].shape) +
                       ", got " + ad::shape_string(tensors[i].shape()));
    }
  }
  ModelParams m;
  m.config = config;
  auto it = tensors.begin();
  for (std::size_t i = 0; i < config.conv_blocks.size(); ++i) {
    ConvParams c;
    c.weight = *it++;
    c.bias = *it++;
    m.conv.push_back(std::move(c));
  }
  m.feature_w = *it++;
  m.feature_b = *it++;
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    LstmParams p;
    for (Tensor* t : {&p.wx_i, &p.wx_f, &p.wx_o, &p.wx_g, &p.wh_i, &p.wh_f, &p.wh_o, &p.wh_g,
                      &p.b_i, &p.b_f, &p.b_o, &p.b_g}) {
      *t = *it++;
    }
    m.lstm.push_back(std::move(p));
  }
  m.fc1_w = *it++;
  m.fc1_b = *it++;
  m.fc2_w = *it++;
  m.fc2_b = *it++;
  return m;
}

ModelParams ModelParams::clone() const {
  std::vector<Tensor> copies;
  for (const Tensor& t : tensors()) {
    copies.push_back(Tensor::parameter(t.shape(), {t.data().begin(), t.data().end()}));
  }
  return from_tensors(config, std::move(copies));
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  std::vector<Tensor> tensors;
  for (const Slot& s : layout(config)) {
    tensors.push_back(s.bias ? zeros(s.shape) : glorot(rng, s.shape, s.fan_in, s.fan_out));
  }
  return ModelParams::from_tensors(config, std::move(tensors));
}

// --- forward ----------------------------------------------------------------

Tensor cnn_forward(const EventImage& image, const ModelParams& params, bool training,
                   std::uint64_t rng_seed) {
  const ModelConfig& cfg = params.config;
  if (static_cast<std::size_t>(image.height) != cfg.input_h ||
      static_cast<std::size_t>(image.width) != cfg.input_w) {
    throw ShapeError("cnn_forward: image " + std::to_string(image.height) + "x" +
                     std::to_string(image.width) + " does not match model input " +
                     std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  }
  Tensor x = Tensor::constant({1, cfg.input_h, cfg.input_w}, image.pixels);
  for (std::size_t i = 0; i < cfg.conv_blocks.size(); ++i) {
    const ConvBlock& b = cfg.conv_blocks[i];
    x = ad::relu(ad::conv2d(x, params.conv[i].weight, params.conv[i].bias, b.stride,
                            b.kernel / 2));
    if (b.pool > 1) x = ad::maxpool2d(x, b.pool);
  }
  x = ad::reshape(x, {x.size(), 1});
  x = affine(params.feature_w, x, params.feature_b);
  return ad::dropout(x, cfg.dropout_rate, training, rng_seed);
}

std::vector<Tensor> reshape_features(const Tensor& features) {
  const std::size_t n = features.size();
  const std::size_t s = integer_sqrt(n);
  if (n == 0 || s * s != n) {
    throw ShapeError("reshape_features: length " + std::to_string(n) + " is not a perfect square");
  }
  const Tensor column = features.shape() == ad::Shape{n, 1} ? features
                                                            : ad::reshape(features, {n, 1});
  std::vector<Tensor> steps;
  steps.reserve(s);
  for (std::size_t j = 0; j < s; ++j) steps.push_back(ad::slice(column, j * s, (j + 1) * s));
  return steps;
}

LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& p) {
  const std::size_t H = p.hidden();
  if (x.shape() != ad::Shape{p.input_width(), 1}) {
    throw ShapeError("lstm_step: input " + ad::shape_string(x.shape()) + ", layer expects [" +
                     std::to_string(p.input_width()) + ",1]");
  }
  if (state.h.shape() != ad::Shape{H, 1} || state.c.shape() != ad::Shape{H, 1}) {
    throw ShapeError("lstm_step: state does not match hidden width " + std::to_string(H));
  }
  const Tensor i = ad::sigmoid(gate(p.wx_i, p.wh_i, p.b_i, x, state.h));
  const Tensor f = ad::sigmoid(gate(p.wx_f, p.wh_f, p.b_f, x, state.h));
  const Tensor o = ad::sigmoid(gate(p.wx_o, p.wh_o, p.b_o, x, state.h));
  const Tensor g = ad::tanh(gate(p.wx_g, p.wh_g, p.b_g, x, state.h));
  LstmState next;
  next.c = ad::add(ad::mul(f, state.c), ad::mul(i, g));
  next.h = ad::mul(o, ad::tanh(next.c));
  return next;
}

Tensor stacked_lstm_forward(std::span<const Tensor> sequence, std::span<const LstmParams> layers) {
  if (sequence.empty()) throw ShapeError("stacked_lstm_forward: empty sequence");
  if (layers.empty()) throw ShapeError("stacked_lstm_forward: no layers");
  std::vector<Tensor> inputs(sequence.begin(), sequence.end());
  std::vector<Tensor> outputs;
  for (const LstmParams& layer : layers) {
    LstmState state = LstmState::zeros(layer.hidden());
    outputs.clear();
    outputs.reserve(inputs.size());
    for (const Tensor& x : inputs) {
      state = lstm_step(x, state, layer);
      outputs.push_back(state.h);
    }
    inputs.swap(outputs);
  }
  return inputs.back();
}

Tensor pose_head(const Tensor& hidden, const ModelParams& params) {
  const Tensor h = ad::relu(affine(params.fc1_w, hidden, params.fc1_b));
  return affine(params.fc2_w, h, params.fc2_b);
}

Tensor forward(const EventImage& image, const ModelParams& params, bool training,
               std::uint64_t rng_seed) {
  const Tensor features = cnn_forward(image, params, training, rng_seed);
  const std::vector<Tensor> steps = reshape_features(features);
  return pose_head(stacked_lstm_forward(steps, params.lstm), params);
}

Tensor pose_loss(const Tensor& prediction, const PoseLabel& label) {
  if (prediction.size() != 7) {
    throw ShapeError("pose_loss: prediction has " + std::to_string(prediction.size()) +
                     " values, expected 7");
  }
  for (double v : prediction.data()) {
    if (!std::isfinite(v)) throw NumericError("pose_loss: non-finite prediction");
  }
  const Tensor pred = prediction.shape() == ad::Shape{7, 1} ? prediction
                                                            : ad::reshape(prediction, {7, 1});
  const Tensor p = Tensor::constant({3, 1}, {label.p.begin(), label.p.end()});
  const Tensor q = Tensor::constant({4, 1}, {label.q.begin(), label.q.end()});
  return ad::add(ad::l2norm(ad::sub(ad::slice(pred, 0, 3), p)),
                 ad::l2norm(ad::sub(ad::slice(pred, 3, 7), q)));
}

PosePrediction to_prediction(std::span<const double> raw) {
  if (raw.size() != 7) throw ShapeError("to_prediction: expected 7 values");
  PosePrediction out;
  for (int i = 0; i < 3; ++i) out.p_hat[i] = raw[i];
  double n2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    out.q_hat_raw[i] = raw[3 + i];
    n2 += raw[3 + i] * raw[3 + i];
  }
  const double n = std::sqrt(n2);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw NumericError("predict: degenerate quaternion output (norm " + std::to_string(n) + ")");
  }
  for (int i = 0; i < 4; ++i) out.q_hat[i] = out.q_hat_raw[i] / n;
  return out;
}

PosePrediction predict(const EventImage& image, const ModelParams& params) {
  const Tensor raw = forward(image, params, false, 0);
  return to_prediction(raw.data());
}

}  // namespace evpose::model
