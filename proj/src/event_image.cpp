// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/event_image.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "evpose/error.hpp"

namespace evpose::image {

std::vector<Event> select_fraction(const EventWindow& window, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw RangeError("event fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = window.events.size();
  // Same epsilon as train_count: 0.3 * 10 must give 3, not 4.
  std::size_t k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  k = std::min(k, n);
  if (n > 0) k = std::max<std::size_t>(k, 1);
  return {window.events.end() - static_cast<std::ptrdiff_t>(k), window.events.end()};
}

EventImage build_image(std::span<const Event> events, int height, int width) {
  if (height <= 0 || width <= 0) throw BoundsError("image dimensions must be positive");
  EventImage img;
  img.height = height;
  img.width = width;
  img.pixels.assign(static_cast<std::size_t>(height) * width, kBackground);

  // Windows from window_events are already sorted; only sort when needed.
  std::vector<std::size_t> order(events.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool sorted = std::is_sorted(events.begin(), events.end(),
                                     [](const Event& a, const Event& b) { return a.t < b.t; });
  if (!sorted) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return events[a].t < events[b].t; });
  }
  for (std::size_t i : order) {
    const Event& e = events[i];
    if (e.x < 0 || e.x >= width || e.y < 0 || e.y >= height) {
      throw BoundsError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                        ") outside " + std::to_string(width) + "x" + std::to_string(height));
    }
    img.pixels[static_cast<std::size_t>(e.y) * width + e.x] = e.rho > 0 ? 1.0 : 0.0;
  }
  return img;
}

EventImage build_window_image(const EventWindow& window, SensorSize sensor, double fraction) {
  EventImage img = fraction == 1.0
                       ? build_image(window.events, sensor.height, sensor.width)
                       : build_image(select_fraction(window, fraction), sensor.height,
                                     sensor.width);
  img.source_window = window.sequence_index;
  img.fraction_used = fraction;
  return img;
}

void write_pgm(std::ostream& out, const EventImage& img) {
  out << "P2\n" << img.width << ' ' << img.height << "\n255\n";
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double v = img.at(y, x);
      const int level = v == 0.0 ? 0 : (v == 1.0 ? 255 : 128);
      out << level << (x + 1 == img.width ? '\n' : ' ');
    }
  }
}

}  // namespace evpose::image
