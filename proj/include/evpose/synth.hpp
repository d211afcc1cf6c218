// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evpose/event_io.hpp"

namespace evpose::synth {

struct Segment {
  Vec3 a{};
  Vec3 b{};
};

/// Sinusoidal motion per axis: v(t) = base + amplitude * sin(2 pi freq t + phase).
struct AxisMotion {
  Vec3 base{};
  Vec3 amplitude{};
  Vec3 frequency_hz{};
  Vec3 phase{};
};

/// Camera path. Rotation angles are degrees about x (tilt), y (pan) and
/// z (roll), composed as R = Ry * Rx * Rz. The pose maps camera to world;
/// the camera looks down +z with x right and y down.
struct Trajectory {
  AxisMotion position;
  AxisMotion rotation_deg;
};

struct SceneConfig {
  int width = 64;
  int height = 64;
  double focal_px = 50.0;
  std::optional<double> cx;  ///< defaults to width / 2
  std::optional<double> cy;  ///< defaults to height / 2
  double near = 0.05;        ///< clip distance in front of the camera
  std::vector<Segment> segments;
  Trajectory trajectory;
  double rate_hz = 200.0;
  double duration_s = 2.0;
  std::uint64_t seed = 7;

  double principal_x() const { return cx.value_or(width / 2.0); }
  double principal_y() const { return cy.value_or(height / 2.0); }

  /// Throws ConfigError on a violated invariant.
  void validate() const;
  std::size_t pose_count() const;

  /// Three non-coplanar quadrilateral wireframes in front of a camera doing
  /// a small 6-DOF wobble.
  static SceneConfig default_scene();
};

/// Four edges of the planar quad with the given center, half extents and
/// in-plane axes.
std::vector<Segment> quad(const Vec3& center, const Vec3& axis_u, const Vec3& axis_v,
                          double half_u, double half_v);

/// Pose of the camera at time t.
PoseLabel pose_at(const Trajectory& trajectory, double t);

/// Binary h x w edge mask, row-major. Segments are clipped against the near
/// plane, projected with the pinhole model and drawn one pixel wide.
std::vector<std::uint8_t> render_edge_frame(const SceneConfig& config, const PoseLabel& pose);

struct Dataset {
  std::vector<PoseLabel> poses;
  std::vector<Event> events;
  std::string events_text;
  std::string groundtruth_text;
};

/// Samples poses at rate_hz and emits one event per pixel whose edge mask
/// toggles between consecutive samples: +1 when it turns on, -1 when off.
/// Timestamps are jittered uniformly inside the interval (t_k, t_k+1].
Dataset generate_dataset(const SceneConfig& config);

SceneConfig scene_from_json(std::string_view text);
std::string scene_to_json(const SceneConfig& config);

}  // namespace evpose::synth
