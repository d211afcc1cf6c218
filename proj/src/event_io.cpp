// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/event_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string_view>

#include "evpose/error.hpp"
#include "evpose/rng.hpp"

namespace evpose::io {
namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& value) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  return ec == std::errc() && ptr == end;
}

double parse_real(std::string_view tok, std::size_t line_no, const char* field) {
  double v = 0.0;
  if (!parse_number(tok, v) || !std::isfinite(v)) {
    throw ParseError(line_no, std::string("bad ") + field + " '" + std::string(tok) + "'");
  }
  return v;
}

int parse_int(std::string_view tok, std::size_t line_no, const char* field) {
  int v = 0;
  if (!parse_number(tok, v)) {
    throw ParseError(line_no, std::string("bad ") + field + " '" + std::string(tok) + "'");
  }
  return v;
}

// Calls fn(tokens, line_number) for every non-blank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    fn(tokens, line_no);
  }
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Quaternion canonicalize_quaternion(Quaternion q) {
  double n2 = 0.0;
  for (double c : q) n2 += c * c;
  const double n = std::sqrt(n2);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw RotationError("quaternion has zero or non-finite norm");
  }
  if (std::abs(n - 1.0) > 1e-12) {
    for (double& c : q) c /= n;
  }
  bool flip = q[3] < 0.0;
  if (q[3] == 0.0) {
    for (int i = 0; i < 3; ++i) {
      if (q[i] != 0.0) {
        flip = q[i] < 0.0;
        break;
      }
    }
  }
  if (flip) {
    for (double& c : q) c = -c;
  }
  // Avoid -0.0 so canonical values print identically.
  for (double& c : q) c += 0.0;
  return q;
}

std::vector<Event> parse_events(std::istream& in, SensorSize sensor, ParseStats* stats) {
  std::vector<Event> events;
  ParseStats local;
  for_each_record(in, [&](const std::vector<std::string_view>& tok, std::size_t line_no) {
    ++local.lines;
    if (tok.size() != 4) {
      throw ParseError(line_no, "expected 4 fields 't x y p', got " + std::to_string(tok.size()));
    }
    Event e;
    e.t = parse_real(tok[0], line_no, "timestamp");
    if (e.t < 0.0) throw ParseError(line_no, "negative timestamp");
    e.x = parse_int(tok[1], line_no, "x");
    e.y = parse_int(tok[2], line_no, "y");
    const int p = parse_int(tok[3], line_no, "polarity");
    if (p != 0 && p != 1) throw ParseError(line_no, "polarity must be 0 or 1");
    e.rho = p == 1 ? 1 : -1;
    if (e.x < 0 || e.x >= sensor.width || e.y < 0 || e.y >= sensor.height) {
      throw BoundsError("line " + std::to_string(line_no) + ": pixel (" + std::to_string(e.x) +
                        ", " + std::to_string(e.y) + ") outside " +
                        std::to_string(sensor.width) + "x" + std::to_string(sensor.height));
    }
    if (!events.empty() && e.t < events.back().t) ++local.non_monotone;
    events.push_back(e);
  });
  if (stats) *stats = local;
  return events;
}

std::vector<PoseLabel> parse_poses(std::istream& in) {
  std::vector<PoseLabel> poses;
  for_each_record(in, [&](const std::vector<std::string_view>& tok, std::size_t line_no) {
    if (tok.size() != 8) {
      throw ParseError(line_no, "expected 8 fields 't px py pz qx qy qz qw', got " +
                                    std::to_string(tok.size()));
    }
    PoseLabel pose;
    pose.t = parse_real(tok[0], line_no, "timestamp");
    for (int i = 0; i < 3; ++i) pose.p[i] = parse_real(tok[1 + i], line_no, "position");
    Quaternion q;
    for (int i = 0; i < 4; ++i) q[i] = parse_real(tok[4 + i], line_no, "quaternion");
    try {
      pose.q = canonicalize_quaternion(q);
    } catch (const RotationError& err) {
      throw RotationError("line " + std::to_string(line_no) + ": " + err.what());
    }
    if (!poses.empty() && !(pose.t > poses.back().t)) {
      throw OrderingError("line " + std::to_string(line_no) +
                          ": groundtruth timestamps must be strictly increasing");
    }
    poses.push_back(pose);
  });
  return poses;
}

void write_events(std::ostream& out, std::span<const Event> events) {
  for (const Event& e : events) {
    out << format_real(e.t) << ' ' << e.x << ' ' << e.y << ' ' << (e.rho > 0 ? 1 : 0) << '\n';
  }
}

void write_poses(std::ostream& out, std::span<const PoseLabel> poses) {
  for (const PoseLabel& p : poses) {
    out << format_real(p.t);
    for (double v : p.p) out << ' ' << format_real(v);
    for (double v : p.q) out << ' ' << format_real(v);
    out << '\n';
  }
}

WindowingResult window_events(std::span<const Event> events, std::span<const PoseLabel> poses) {
  if (poses.size() < 2) {
    throw InsufficientDataError("windowing needs at least 2 groundtruth poses, got " +
                                std::to_string(poses.size()));
  }
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (!(poses[i].t > poses[i - 1].t)) {
      throw OrderingError("groundtruth timestamps must be strictly increasing");
    }
  }

  std::vector<Event> sorted(events.begin(), events.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });

  WindowingResult result;
  auto it = sorted.begin();
  // Everything at or before the first stamp belongs to no interval.
  while (it != sorted.end() && it->t <= poses.front().t) {
    ++it;
    ++result.discarded_events;
  }
  for (std::size_t i = 0; i + 1 < poses.size(); ++i) {
    const double end = poses[i + 1].t;
    auto first = it;
    while (it != sorted.end() && it->t <= end) ++it;
    if (first == it) {
      ++result.skipped_empty;
      continue;
    }
    EventWindow w;
    w.events.assign(first, it);
    w.label = poses[i + 1];
    w.sequence_index = i;
    result.windows.push_back(std::move(w));
  }
  result.discarded_events += static_cast<std::size_t>(sorted.end() - it);
  return result;
}

std::size_t train_count(std::size_t n, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw RangeError("train fraction must lie in (0, 1)");
  }
  if (n < 2) throw InsufficientDataError("splitting needs at least 2 windows");
  // The epsilon absorbs representation error, e.g. 0.7 * 10 = 6.999...
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
}

SplitIndices split_random_indices(std::size_t n, double train_fraction, std::uint64_t seed) {
  const std::size_t k = train_count(n, train_fraction);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(order[i], order[rng.below(i + 1)]);
  }
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Split split_random(std::span<const EventWindow> windows, double train_fraction,
                   std::uint64_t seed) {
  const SplitIndices idx = split_random_indices(windows.size(), train_fraction, seed);
  Split s;
  s.train.reserve(idx.train.size());
  s.test.reserve(idx.test.size());
  for (std::size_t i : idx.train) s.train.push_back(windows[i]);
  for (std::size_t i : idx.test) s.test.push_back(windows[i]);
  return s;
}

Split split_novel(std::span<const EventWindow> windows, double train_fraction) {
  const std::size_t k = train_count(windows.size(), train_fraction);
  Split s;
  s.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(k));
  s.test.assign(windows.begin() + static_cast<std::ptrdiff_t>(k), windows.end());
  return s;
}

}  // namespace evpose::io
