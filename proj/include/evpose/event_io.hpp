// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace evpose {

/// Quaternion stored as (qx, qy, qz, qw).
using Quaternion = std::array<double, 4>;
using Vec3 = std::array<double, 3>;

/// One brightness change reported by the sensor.
struct Event {
  double t = 0.0;  ///< seconds
  int x = 0;       ///< column
  int y = 0;       ///< row
  int rho = 1;     ///< polarity, -1 or +1

  bool operator==(const Event&) const = default;
};

/// Groundtruth camera pose. `q` is unit length with qw >= 0.
struct PoseLabel {
  double t = 0.0;
  Vec3 p{};
  Quaternion q{0.0, 0.0, 0.0, 1.0};

  bool operator==(const PoseLabel&) const = default;
};

/// Events between two consecutive groundtruth stamps, labeled with the later pose.
struct EventWindow {
  std::vector<Event> events;
  PoseLabel label;
  std::size_t sequence_index = 0;
};

struct SensorSize {
  int width = 240;
  int height = 180;
};

namespace io {

/// Counters filled by parse_events for conditions that are reported but not fatal.
struct ParseStats {
  std::size_t lines = 0;
  std::size_t non_monotone = 0;
};

/// Parses "t x y p" lines (p in {0,1}) into events in file order.
/// Throws ParseError on malformed lines and BoundsError on coordinates
/// outside the sensor.
std::vector<Event> parse_events(std::istream& in, SensorSize sensor,
                                ParseStats* stats = nullptr);

/// Parses "t px py pz qx qy qz qw" lines. Quaternions come back unit length
/// and sign-canonicalized; timestamps must be strictly increasing.
std::vector<PoseLabel> parse_poses(std::istream& in);

void write_events(std::ostream& out, std::span<const Event> events);
void write_poses(std::ostream& out, std::span<const PoseLabel> poses);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

/// Normalizes to unit length and picks the hemisphere with qw >= 0 (or the
/// first nonzero of qx, qy, qz positive when qw == 0). Inputs already unit
/// length to 1e-12 are not rescaled, so canonical values are fixed points.
/// Throws RotationError on a zero or non-finite quaternion.
Quaternion canonicalize_quaternion(Quaternion q);

struct WindowingResult {
  std::vector<EventWindow> windows;
  std::size_t skipped_empty = 0;      ///< intervals that held no events
  std::size_t discarded_events = 0;   ///< events outside the groundtruth span
};

/// Groups events into windows (t_i, t_{i+1}] labeled with the pose at t_{i+1}.
/// Events are stably sorted by time first. Empty intervals are dropped and
/// counted. Throws InsufficientDataError with fewer than two poses.
WindowingResult window_events(std::span<const Event> events,
                              std::span<const PoseLabel> poses);

struct Split {
  std::vector<EventWindow> train;
  std::vector<EventWindow> test;
};

/// Number of training samples for a split of `n` items: floor(fraction * n).
std::size_t train_count(std::size_t n, double train_fraction);

/// Indices of a seeded random partition. Each side is in ascending order.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
SplitIndices split_random_indices(std::size_t n, double train_fraction,
                                  std::uint64_t seed);

/// Seeded uniform partition; relative order inside each side is preserved.
Split split_random(std::span<const EventWindow> windows, double train_fraction,
                   std::uint64_t seed);

/// Temporal prefix/suffix partition: windows are expected in sequence order.
Split split_novel(std::span<const EventWindow> windows, double train_fraction);

}  // namespace io
}  // namespace evpose
