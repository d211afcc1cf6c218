// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evpose/autodiff.hpp"
#include "evpose/event_image.hpp"
#include "evpose/event_io.hpp"

namespace evpose::model {

using ad::Tensor;

/// conv(kernel, stride, padding kernel/2) -> relu -> maxpool(pool). pool = 1
/// disables pooling.
struct ConvBlock {
  std::size_t out_channels = 8;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pool = 2;

  bool operator==(const ConvBlock&) const = default;
};

struct ModelConfig {
  std::size_t input_h = 64;
  std::size_t input_w = 64;
  std::vector<ConvBlock> conv_blocks{{8, 3, 1, 2}, {16, 3, 1, 2}, {16, 3, 1, 2}};
  std::size_t feature_dim = 256;  ///< must be a perfect square S*S
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 128;
  double dropout_rate = 0.5;

  bool operator==(const ModelConfig&) const = default;

  /// Side S of the feature grid: the LSTM runs S steps of S-wide inputs.
  std::size_t feature_side() const;
  /// Shape of the CNN output before the feature FC layer, {C, H, W}.
  ad::Shape conv_output_shape() const;
  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Tiny network used by gradient checks: 8x8 input, F=16, hidden 8, fc 8.
  static ModelConfig toy();
};

/// Weights of one LSTM layer. Input matrices are [H, in], recurrent ones
/// [H, H], biases [H, 1].
struct LstmParams {
  Tensor wx_i, wx_f, wx_o, wx_g;
  Tensor wh_i, wh_f, wh_o, wh_g;
  Tensor b_i, b_f, b_o, b_g;

  std::size_t hidden() const { return b_i.shape()[0]; }
  std::size_t input_width() const { return wx_i.shape()[1]; }
};

struct LstmState {
  Tensor h;  ///< [H, 1]
  Tensor c;  ///< [H, 1]

  static LstmState zeros(std::size_t hidden);
};

struct ConvParams {
  Tensor weight;  ///< [O, C, K, K]
  Tensor bias;    ///< [O]
};

struct ModelParams {
  ModelConfig config;
  std::vector<ConvParams> conv;
  Tensor feature_w, feature_b;  ///< [F, D], [F, 1]
  std::vector<LstmParams> lstm;
  Tensor fc1_w, fc1_b;  ///< [fc, H], [fc, 1]
  Tensor fc2_w, fc2_b;  ///< [7, fc], [7, 1]

  /// Every learnable tensor in canonical order. The returned handles share
  /// storage with the model.
  std::vector<Tensor> tensors() const;
  /// Names matching tensors(), e.g. "lstm.1.wh_f".
  std::vector<std::string> names() const;
  /// Builds a model from tensors in canonical order; shapes are checked
  /// against `config`.
  static ModelParams from_tensors(const ModelConfig& config, std::vector<Tensor> tensors);
  /// Deep copy with fresh parameter nodes.
  ModelParams clone() const;
};

/// Glorot-uniform weights, zero biases, drawn in canonical order from `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Network output split into position and quaternion.
struct PosePrediction {
  Vec3 p_hat{};
  Quaternion q_hat_raw{};
  Quaternion q_hat{};
};

/// Conv blocks, flatten, FC to feature_dim, dropout (training only).
/// Returns [F, 1].
Tensor cnn_forward(const EventImage& image, const ModelParams& params, bool training,
                   std::uint64_t rng_seed);

/// Row-major split of an S*S feature vector into S steps of width S: element
/// k of step j is v[j*S + k]. Each step is [S, 1].
std::vector<Tensor> reshape_features(const Tensor& features);

/// One step of the gated recurrence
///   i = sig(Wxi x + Whi h + bi)   f = sig(Wxf x + Whf h + bf)
///   o = sig(Wxo x + Who h + bo)   g = tanh(Wxg x + Whg h + bg)
///   c' = f*c + i*g                h' = o*tanh(c')
LstmState lstm_step(const Tensor& x, const LstmState& state, const LstmParams& params);

/// Runs each layer over the full sequence produced by the one below, from
/// zero state, and returns the top layer's final hidden vector.
Tensor stacked_lstm_forward(std::span<const Tensor> sequence, std::span<const LstmParams> layers);

/// FC(H -> fc) + relu, then FC(fc -> 7). Output (p1, p2, p3, qx, qy, qz, qw).
Tensor pose_head(const Tensor& hidden, const ModelParams& params);

/// Full forward pass to the raw 7-vector.
Tensor forward(const EventImage& image, const ModelParams& params, bool training,
               std::uint64_t rng_seed);

/// ||p_hat - p|| + ||q_hat - q|| on the raw network output.
Tensor pose_loss(const Tensor& prediction, const PoseLabel& label);

/// Splits a raw 7-vector and normalizes the quaternion part. Throws
/// NumericError if the quaternion part is zero or non-finite.
PosePrediction to_prediction(std::span<const double> raw);

/// Inference-mode forward pass followed by quaternion normalization.
PosePrediction predict(const EventImage& image, const ModelParams& params);

}  // namespace evpose::model
