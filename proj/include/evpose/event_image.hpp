// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "evpose/event_io.hpp"

namespace evpose {

/// Ternary event image: 1.0 where the latest event at a pixel had positive
/// polarity, 0.0 for negative, 0.5 where no event landed. Row-major, y rows.
struct EventImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;
  std::size_t source_window = 0;
  double fraction_used = 1.0;

  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

namespace image {

inline constexpr double kBackground = 0.5;

/// The newest ceil(fraction * n) events of the window, in ascending time.
/// Throws RangeError unless 0 < fraction <= 1.
std::vector<Event> select_fraction(const EventWindow& window, double fraction);

/// Paints events onto a 0.5 grid in ascending timestamp order, so the latest
/// event at a pixel wins. Throws BoundsError for events outside h x w.
EventImage build_image(std::span<const Event> events, int height, int width);

/// Convenience: select_fraction followed by build_image, tagged with the
/// window's sequence index.
EventImage build_window_image(const EventWindow& window, SensorSize sensor,
                              double fraction = 1.0);

/// Plain PGM (P2) with 0 -> 0, 0.5 -> 128, 1 -> 255.
void write_pgm(std::ostream& out, const EventImage& img);

}  // namespace image
}  // namespace evpose
