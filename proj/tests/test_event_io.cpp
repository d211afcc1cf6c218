// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "evpose/error.hpp"
#include "evpose/event_io.hpp"
#include "evpose/rng.hpp"

using namespace evpose;

namespace {

std::vector<Event> events_of(const std::string& text, SensorSize s = {}) {
  std::istringstream in(text);
  return io::parse_events(in, s);
}

std::vector<PoseLabel> poses_of(const std::string& text) {
  std::istringstream in(text);
  return io::parse_poses(in);
}

PoseLabel pose_at(double t) {
  PoseLabel p;
  p.t = t;
  p.p = {t, 0.0, 0.0};
  return p;
}

std::vector<EventWindow> numbered_windows(std::size_t n) {
  std::vector<EventWindow> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i].sequence_index = i;
  return w;
}

std::vector<std::size_t> indices(const std::vector<EventWindow>& w) {
  std::vector<std::size_t> out;
  for (const auto& x : w) out.push_back(x.sequence_index);
  return out;
}

}  // namespace

TEST_CASE("parse_events maps polarity 0/1 to -1/+1") {
  const auto ev = events_of("0.003811 96 133 0\n1.5 0 0 1\n");
  REQUIRE(ev.size() == 2);
  CHECK(ev[0] == Event{0.003811, 96, 133, -1});
  CHECK(ev[1] == Event{1.5, 0, 0, 1});
}

TEST_CASE("parse_events skips blank lines and keeps file order") {
  const auto ev = events_of("\n0.2 1 1 1\n\n0.1 2 2 0\n");
  REQUIRE(ev.size() == 2);
  CHECK(ev[0].t == 0.2);
  CHECK(ev[1].t == 0.1);
}

TEST_CASE("parse_events counts non-monotone timestamps without failing") {
  std::istringstream in("0.2 1 1 1\n0.1 2 2 0\n0.3 0 0 1\n");
  io::ParseStats stats;
  const auto ev = io::parse_events(in, {}, &stats);
  CHECK(ev.size() == 3);
  CHECK(stats.lines == 3);
  CHECK(stats.non_monotone == 1);
}

TEST_CASE("parse_events rejects out-of-bounds pixels") {
  CHECK_THROWS_AS(events_of("0.1 500 10 1\n", {240, 180}), BoundsError);
  CHECK_THROWS_AS(events_of("0.1 10 180 1\n", {240, 180}), BoundsError);
  CHECK_THROWS_AS(events_of("0.1 -1 0 1\n", {240, 180}), BoundsError);
  CHECK_NOTHROW(events_of("0.1 239 179 1\n", {240, 180}));
}

TEST_CASE("parse errors carry the line number") {
  try {
    events_of("0.1 1 1 1\n0.2 1 1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(events_of("0.1 1 1 2\n"), ParseError);
  CHECK_THROWS_AS(events_of("abc 1 1 1\n"), ParseError);
  CHECK_THROWS_AS(events_of("0.1 1.5 1 1\n"), ParseError);
  CHECK_THROWS_AS(events_of("0.1 1 1 1 9\n"), ParseError);
}

TEST_CASE("parse_poses normalizes and sign-canonicalizes") {
  auto p = poses_of("0.0 1 2 3 0 0 0 2\n");
  REQUIRE(p.size() == 1);
  CHECK(p[0].t == 0.0);
  CHECK(p[0].p == Vec3{1, 2, 3});
  CHECK(p[0].q == Quaternion{0, 0, 0, 1});

  p = poses_of("0.0 0 0 0 0 0 0 -1\n");
  CHECK(p[0].q == Quaternion{0, 0, 0, 1});

  p = poses_of("0.0 0 0 0 0 -1 0 0\n");
  CHECK(p[0].q == Quaternion{0, 1, 0, 0});
}

TEST_CASE("parse_poses errors") {
  CHECK_THROWS_AS(poses_of("0.0 0 0 0 0 0 0 0\n"), RotationError);
  CHECK_THROWS_AS(poses_of("0.1 0 0 0 0 0 0 1\n0.1 0 0 0 0 0 0 1\n"), OrderingError);
  CHECK_THROWS_AS(poses_of("0.2 0 0 0 0 0 0 1\n0.1 0 0 0 0 0 0 1\n"), OrderingError);
  CHECK_THROWS_AS(poses_of("0.2 0 0 0 0 0 1\n"), ParseError);
}

TEST_CASE("canonicalized quaternions are unit with qw >= 0") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    Quaternion q;
    for (double& c : q) c = rng.uniform(-3.0, 3.0);
    const Quaternion c = io::canonicalize_quaternion(q);
    const double n = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]);
    CHECK(std::abs(n - 1.0) <= 1e-9);
    CHECK(c[3] >= 0.0);
  }
}

TEST_CASE("write then parse round-trips exactly") {
  Rng rng(3);
  std::vector<Event> ev;
  for (int i = 0; i < 200; ++i) {
    ev.push_back({rng.uniform(0.0, 10.0), static_cast<int>(rng.below(240)),
                  static_cast<int>(rng.below(180)), rng.below(2) ? 1 : -1});
  }
  std::stringstream es;
  io::write_events(es, ev);
  CHECK(io::parse_events(es, {}) == ev);

  std::vector<PoseLabel> poses;
  for (int i = 0; i < 50; ++i) {
    PoseLabel p;
    p.t = 0.01 * (i + 1) + 1e-7 * rng.uniform();
    p.p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    p.q = io::canonicalize_quaternion(
        {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    poses.push_back(p);
  }
  std::stringstream ps;
  io::write_poses(ps, poses);
  CHECK(io::parse_poses(ps) == poses);
}

TEST_CASE("window_events groups by half-open intervals") {
  const std::vector<PoseLabel> poses{pose_at(0.0), pose_at(0.005), pose_at(0.010)};
  const std::vector<Event> ev{{0.001, 0, 0, 1}, {0.004, 1, 0, 1}, {0.007, 2, 0, -1}};
  const auto r = io::window_events(ev, poses);
  REQUIRE(r.windows.size() == 2);
  CHECK(r.windows[0].events.size() == 2);
  CHECK(r.windows[0].label == poses[1]);
  CHECK(r.windows[1].events.size() == 1);
  CHECK(r.windows[1].events[0].t == 0.007);
  CHECK(r.windows[1].label == poses[2]);
  CHECK(r.skipped_empty == 0);
}

TEST_CASE("window_events boundary and discard rules") {
  const std::vector<PoseLabel> poses{pose_at(0.0), pose_at(0.005), pose_at(0.010)};
  const std::vector<Event> ev{
      {0.0, 0, 0, 1}, {0.005, 0, 0, 1}, {0.0051, 0, 0, 1}, {0.010, 0, 0, 1}, {0.02, 0, 0, 1}};
  const auto r = io::window_events(ev, poses);
  REQUIRE(r.windows.size() == 2);
  CHECK(r.windows[0].events.size() == 1);
  CHECK(r.windows[0].events[0].t == 0.005);
  CHECK(r.windows[1].events.size() == 2);
  CHECK(r.discarded_events == 2);
}

TEST_CASE("window_events drops empty intervals") {
  const std::vector<PoseLabel> poses{pose_at(0.0), pose_at(0.005)};
  const auto r = io::window_events({}, poses);
  CHECK(r.windows.empty());
  CHECK(r.skipped_empty == 1);

  const std::vector<PoseLabel> three{pose_at(0.0), pose_at(0.005), pose_at(0.010)};
  const std::vector<Event> late{{0.008, 0, 0, 1}};
  const auto r2 = io::window_events(late, three);
  REQUIRE(r2.windows.size() == 1);
  CHECK(r2.skipped_empty == 1);
  CHECK(r2.windows[0].sequence_index == 1);
}

TEST_CASE("window_events sorts by time with ties in file order") {
  const std::vector<PoseLabel> poses{pose_at(0.0), pose_at(1.0)};
  const std::vector<Event> ev{{0.5, 1, 0, 1}, {0.2, 2, 0, 1}, {0.5, 3, 0, -1}};
  const auto r = io::window_events(ev, poses);
  REQUIRE(r.windows.size() == 1);
  const auto& w = r.windows[0].events;
  REQUIRE(w.size() == 3);
  CHECK(w[0].x == 2);
  CHECK(w[1].x == 1);
  CHECK(w[2].x == 3);
}

TEST_CASE("window_events needs two poses") {
  const std::vector<PoseLabel> one{pose_at(0.0)};
  CHECK_THROWS_AS(io::window_events({}, one), InsufficientDataError);
}

TEST_CASE("split_random is deterministic and floor-sized") {
  const auto w = numbered_windows(10);
  const auto a = io::split_random(w, 0.7, 42);
  const auto b = io::split_random(w, 0.7, 42);
  CHECK(indices(a.train) == indices(b.train));
  CHECK(indices(a.test) == indices(b.test));
  CHECK(a.train.size() == 7);
  CHECK(a.test.size() == 3);

  std::vector<std::size_t> all = indices(a.train);
  const auto t = indices(a.test);
  all.insert(all.end(), t.begin(), t.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(10);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  CHECK(std::is_sorted(a.train.begin(), a.train.end(),
                       [](auto& x, auto& y) { return x.sequence_index < y.sequence_index; }));
  CHECK(std::is_sorted(a.test.begin(), a.test.end(),
                       [](auto& x, auto& y) { return x.sequence_index < y.sequence_index; }));
}

TEST_CASE("split_random seeds differ") {
  const auto w = numbered_windows(50);
  CHECK(indices(io::split_random(w, 0.5, 1).train) != indices(io::split_random(w, 0.5, 2).train));
}

TEST_CASE("split sizes follow floor") {
  for (std::size_t n : {3u, 10u, 101u}) {
    const auto w = numbered_windows(n);
    const auto expect = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(n)));
    CHECK(io::split_random(w, 0.7, 0).train.size() == expect);
    CHECK(io::split_novel(w, 0.7).train.size() == expect);
  }
}

TEST_CASE("split_novel is a prefix split") {
  auto s = io::split_novel(numbered_windows(10), 0.7);
  CHECK(indices(s.train) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6});
  CHECK(indices(s.test) == std::vector<std::size_t>{7, 8, 9});
  s = io::split_novel(numbered_windows(3), 0.7);
  CHECK(indices(s.train) == std::vector<std::size_t>{0, 1});
  CHECK(indices(s.test) == std::vector<std::size_t>{2});
}

TEST_CASE("split errors") {
  CHECK_THROWS_AS(io::split_random(numbered_windows(1), 0.7, 0), InsufficientDataError);
  CHECK_THROWS_AS(io::split_novel(numbered_windows(1), 0.7), InsufficientDataError);
  CHECK_THROWS_AS(io::split_novel(numbered_windows(5), 0.0), RangeError);
  CHECK_THROWS_AS(io::split_novel(numbered_windows(5), 1.0), RangeError);
}
