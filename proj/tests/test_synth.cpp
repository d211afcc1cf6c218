// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "evpose/error.hpp"
#include "evpose/synth.hpp"

using namespace evpose;

namespace {

synth::SceneConfig single_segment(Vec3 a, Vec3 b) {
  synth::SceneConfig cfg;
  cfg.segments = {{a, b}};
  return cfg;
}

std::size_t lit(const std::vector<std::uint8_t>& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
}

PoseLabel at_position(Vec3 p) {
  PoseLabel pose;
  pose.p = p;
  return pose;
}

// (x, y) -> polarity for every pixel that toggles between two masks.
std::map<std::pair<int, int>, int> toggles(const std::vector<std::uint8_t>& before,
                                           const std::vector<std::uint8_t>& after, int width) {
  std::map<std::pair<int, int>, int> out;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i] != after[i]) {
      out[{static_cast<int>(i) % width, static_cast<int>(i) / width}] = after[i] ? 1 : -1;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("segment on the optical axis projects to the image centre") {
  const auto cfg = single_segment({-0.1, 0.0, 1.0}, {0.1, 0.0, 1.0});
  const auto mask = synth::render_edge_frame(cfg, PoseLabel{});
  REQUIRE(mask.size() == 64u * 64u);
  CHECK(mask[32 * 64 + 32] == 1);
  CHECK(mask[10 * 64 + 10] == 0);
  // f * 0.2 / 1 = 10 pixels long, give or take the end pixels.
  CHECK(lit(mask) >= 10);
  CHECK(lit(mask) <= 12);
}

TEST_CASE("projected extent shrinks with distance") {
  const auto cfg = single_segment({-0.3, -0.2, 1.0}, {0.3, 0.2, 1.0});
  std::size_t prev = lit(synth::render_edge_frame(cfg, PoseLabel{}));
  for (double d : {1.0, 2.0, 4.0, 8.0}) {
    const std::size_t n = lit(synth::render_edge_frame(cfg, at_position({0.0, 0.0, -d})));
    CHECK(n < prev);
    prev = n;
  }
}

TEST_CASE("geometry behind the camera is clipped") {
  const auto behind = single_segment({-0.3, 0.0, -1.0}, {0.3, 0.0, -2.0});
  CHECK(lit(synth::render_edge_frame(behind, PoseLabel{})) == 0);
  // A segment crossing the near plane keeps only its visible part.
  const auto crossing = single_segment({0.0, 0.0, -1.0}, {0.0, 0.2, 1.0});
  const auto mask = synth::render_edge_frame(crossing, PoseLabel{});
  CHECK(lit(mask) > 0);
}

TEST_CASE("rotating the camera moves the projection") {
  const auto cfg = single_segment({-0.1, 0.0, 1.0}, {0.1, 0.0, 1.0});
  synth::Trajectory tr;
  tr.rotation_deg.base = {0.0, 20.0, 0.0};
  const auto mask = synth::render_edge_frame(cfg, synth::pose_at(tr, 0.0));
  CHECK(lit(mask) > 0);
  CHECK(mask[32 * 64 + 32] == 0);
}

TEST_CASE("static trajectory emits no events") {
  synth::SceneConfig cfg = synth::SceneConfig::default_scene();
  cfg.trajectory.position.amplitude = {0, 0, 0};
  cfg.trajectory.rotation_deg.amplitude = {0, 0, 0};
  const auto ds = synth::generate_dataset(cfg);
  CHECK(ds.events.empty());
  CHECK(ds.poses.size() == 400);
  CHECK(std::count(ds.groundtruth_text.begin(), ds.groundtruth_text.end(), '\n') == 400);
}

TEST_CASE("events are exactly the mask toggles") {
  synth::SceneConfig cfg = single_segment({-0.2, -0.1, 1.5}, {0.25, 0.15, 1.5});
  cfg.trajectory.position.amplitude = {0.05, 0.0, 0.0};
  cfg.trajectory.position.frequency_hz = {1.0, 0.0, 0.0};
  cfg.duration_s = 0.015;
  const auto ds = synth::generate_dataset(cfg);
  REQUIRE(ds.poses.size() == 3);
  for (std::size_t k = 0; k + 1 < ds.poses.size(); ++k) {
    const auto expect = toggles(synth::render_edge_frame(cfg, ds.poses[k]),
                                synth::render_edge_frame(cfg, ds.poses[k + 1]), cfg.width);
    std::map<std::pair<int, int>, int> got;
    for (const Event& e : ds.events) {
      if (e.t > ds.poses[k].t && e.t <= ds.poses[k + 1].t) {
        CHECK(got.emplace(std::make_pair(e.x, e.y), e.rho).second);
      }
    }
    CHECK(got == expect);
    CHECK_FALSE(got.empty());
  }
}

TEST_CASE("default scene round-trips through the parsers") {
  const auto cfg = synth::SceneConfig::default_scene();
  const auto ds = synth::generate_dataset(cfg);
  CHECK(ds.poses.size() == cfg.pose_count());
  CHECK(ds.events.size() > 1000);
  CHECK(std::is_sorted(ds.events.begin(), ds.events.end(),
                       [](const Event& a, const Event& b) { return a.t < b.t; }));

  std::istringstream ev(ds.events_text), gt(ds.groundtruth_text);
  const auto poses = io::parse_poses(gt);
  const auto events = io::parse_events(ev, {cfg.width, cfg.height});
  CHECK(poses == ds.poses);
  CHECK(events == ds.events);

  const auto w = io::window_events(events, poses);
  CHECK(w.windows.size() >= 64);
  CHECK(w.discarded_events == 0);
  // Every interval whose masks differ yields a window.
  std::size_t changed = 0;
  auto prev = synth::render_edge_frame(cfg, poses[0]);
  for (std::size_t k = 1; k < poses.size(); ++k) {
    auto next = synth::render_edge_frame(cfg, poses[k]);
    changed += prev != next;
    prev = std::move(next);
  }
  CHECK(w.windows.size() == changed);
}

TEST_CASE("generation is deterministic per seed") {
  auto cfg = synth::SceneConfig::default_scene();
  cfg.duration_s = 0.5;
  const auto a = synth::generate_dataset(cfg);
  const auto b = synth::generate_dataset(cfg);
  CHECK(a.events_text == b.events_text);
  CHECK(a.groundtruth_text == b.groundtruth_text);
  cfg.seed = 8;
  const auto c = synth::generate_dataset(cfg);
  CHECK(c.events_text != a.events_text);
  CHECK(c.events.size() == a.events.size());
}

TEST_CASE("scene JSON round-trips and validates") {
  auto cfg = synth::SceneConfig::default_scene();
  cfg.rate_hz = 100.0;
  cfg.cx = 30.5;
  const auto back = synth::scene_from_json(synth::scene_to_json(cfg));
  CHECK(back.rate_hz == 100.0);
  CHECK(back.principal_x() == 30.5);
  CHECK(back.segments.size() == cfg.segments.size());
  CHECK(synth::scene_to_json(back) == synth::scene_to_json(cfg));

  CHECK(synth::scene_from_json("{\"seed\": 3}").seed == 3);
  CHECK_THROWS_AS(synth::scene_from_json("{\"rate_hz\": -1}"), ConfigError);
  CHECK_THROWS_AS(synth::scene_from_json("{\"width\": 0}"), ConfigError);
  CHECK_THROWS_AS(synth::scene_from_json("not json"), ConfigError);
}
