// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "evpose/error.hpp"
#include "evpose/rng.hpp"

namespace evpose::synth {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Quaternion quat_mul(const Quaternion& a, const Quaternion& b) {
  // (x, y, z, w) layout.
  return {a[3] * b[0] + a[0] * b[3] + a[1] * b[2] - a[2] * b[1],
          a[3] * b[1] - a[0] * b[2] + a[1] * b[3] + a[2] * b[0],
          a[3] * b[2] + a[0] * b[1] - a[1] * b[0] + a[2] * b[3],
          a[3] * b[3] - a[0] * b[0] - a[1] * b[1] - a[2] * b[2]};
}

Quaternion axis_angle(int axis, double radians) {
  Quaternion q{0.0, 0.0, 0.0, std::cos(radians / 2.0)};
  q[axis] = std::sin(radians / 2.0);
  return q;
}

Mat3 rotation_matrix(const Quaternion& q) {
  const double x = q[0], y = q[1], z = q[2], w = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

double axis_value(const AxisMotion& m, int i, double t) {
  return m.base[i] +
         m.amplitude[i] * std::sin(2.0 * std::numbers::pi * m.frequency_hz[i] * t + m.phase[i]);
}

// World point into the camera frame: R^T (X - p).
Vec3 to_camera(const Mat3& r, const Vec3& p, const Vec3& x) {
  const Vec3 d{x[0] - p[0], x[1] - p[1], x[2] - p[2]};
  Vec3 out{};
  for (int i = 0; i < 3; ++i) out[i] = r[0][i] * d[0] + r[1][i] * d[1] + r[2][i] * d[2];
  return out;
}

// Liang-Barsky clip of the segment (u0,v0)-(u1,v1) to the box. Returns false
// when nothing remains.
bool clip_box(double& u0, double& v0, double& u1, double& v1, double lo_u, double lo_v,
              double hi_u, double hi_v) {
  double t0 = 0.0, t1 = 1.0;
  const double du = u1 - u0, dv = v1 - v0;
  const double p[4] = {-du, du, -dv, dv};
  const double q[4] = {u0 - lo_u, hi_u - u0, v0 - lo_v, hi_v - v0};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double r = q[i] / p[i];
    if (p[i] < 0.0) {
      t0 = std::max(t0, r);
    } else {
      t1 = std::min(t1, r);
    }
    if (t0 > t1) return false;
  }
  const double nu0 = u0 + t0 * du, nv0 = v0 + t0 * dv;
  u1 = u0 + t1 * du;
  v1 = v0 + t1 * dv;
  u0 = nu0;
  v0 = nv0;
  return true;
}

Vec3 vec3_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

nlohmann::json motion_json(const AxisMotion& m) {
  return {{"base", m.base},
          {"amplitude", m.amplitude},
          {"frequency_hz", m.frequency_hz},
          {"phase", m.phase}};
}

AxisMotion motion_from(const nlohmann::json& j, AxisMotion m) {
  if (j.contains("base")) m.base = vec3_from(j["base"]);
  if (j.contains("amplitude")) m.amplitude = vec3_from(j["amplitude"]);
  if (j.contains("frequency_hz")) m.frequency_hz = vec3_from(j["frequency_hz"]);
  if (j.contains("phase")) m.phase = vec3_from(j["phase"]);
  return m;
}

}  // namespace

void SceneConfig::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("scene: sensor size must be positive");
  if (!(focal_px > 0.0)) throw ConfigError("scene: focal length must be positive");
  if (!(near > 0.0)) throw ConfigError("scene: near clip must be positive");
  if (!(rate_hz > 0.0)) throw ConfigError("scene: rate_hz must be positive");
  if (!(duration_s > 0.0)) throw ConfigError("scene: duration must be positive");
  if (segments.empty()) throw ConfigError("scene: at least one segment is required");
  if (pose_count() < 2) throw ConfigError("scene: rate_hz * duration must give 2+ poses");
}

std::size_t SceneConfig::pose_count() const {
  return static_cast<std::size_t>(std::llround(rate_hz * duration_s));
}

std::vector<Segment> quad(const Vec3& c, const Vec3& u, const Vec3& v, double hu, double hv) {
  auto corner = [&](double su, double sv) {
    return Vec3{c[0] + su * hu * u[0] + sv * hv * v[0], c[1] + su * hu * u[1] + sv * hv * v[1],
                c[2] + su * hu * u[2] + sv * hv * v[2]};
  };
  const Vec3 a = corner(-1, -1), b = corner(1, -1), d = corner(1, 1), e = corner(-1, 1);
  return {{a, b}, {b, d}, {d, e}, {e, a}};
}

SceneConfig SceneConfig::default_scene() {
  SceneConfig s;
  auto add = [&s](std::vector<Segment> q) { s.segments.insert(s.segments.end(), q.begin(), q.end()); };
  const double c45 = std::cos(std::numbers::pi / 4), s45 = std::sin(std::numbers::pi / 4);
  const double c60 = std::cos(std::numbers::pi / 3), s60 = std::sin(std::numbers::pi / 3);
  // Fronto-parallel square, a quad turned 45 degrees about y, and a wide quad
  // tilted 60 degrees about x.
  add(quad({-0.5, -0.3, 3.0}, {1, 0, 0}, {0, 1, 0}, 0.4, 0.4));
  add(quad({0.6, 0.2, 2.5}, {c45, 0, s45}, {0, 1, 0}, 0.3, 0.45));
  add(quad({0.0, 0.55, 4.0}, {1, 0, 0}, {0, c60, s60}, 0.6, 0.25));

  s.trajectory.position.amplitude = {0.2, 0.1, 0.15};
  s.trajectory.position.frequency_hz = {0.45, 0.6, 0.3};
  s.trajectory.position.phase = {0.0, 1.0, 2.0};
  s.trajectory.rotation_deg.amplitude = {8.0, 15.0, 5.0};
  s.trajectory.rotation_deg.frequency_hz = {0.55, 0.8, 0.35};
  s.trajectory.rotation_deg.phase = {0.5, 0.0, 1.5};
  return s;
}

PoseLabel pose_at(const Trajectory& traj, double t) {
  PoseLabel pose;
  pose.t = t;
  for (int i = 0; i < 3; ++i) pose.p[i] = axis_value(traj.position, i, t);
  const double deg = std::numbers::pi / 180.0;
  const Quaternion rx = axis_angle(0, axis_value(traj.rotation_deg, 0, t) * deg);
  const Quaternion ry = axis_angle(1, axis_value(traj.rotation_deg, 1, t) * deg);
  const Quaternion rz = axis_angle(2, axis_value(traj.rotation_deg, 2, t) * deg);
  pose.q = io::canonicalize_quaternion(quat_mul(ry, quat_mul(rx, rz)));
  return pose;
}

std::vector<std::uint8_t> render_edge_frame(const SceneConfig& cfg, const PoseLabel& pose) {
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(cfg.width) * cfg.height, 0);
  const Mat3 r = rotation_matrix(pose.q);
  const double cx = cfg.principal_x(), cy = cfg.principal_y(), f = cfg.focal_px;
  for (const Segment& s : cfg.segments) {
    Vec3 a = to_camera(r, pose.p, s.a);
    Vec3 b = to_camera(r, pose.p, s.b);
    if (a[2] < cfg.near && b[2] < cfg.near) continue;
    if (a[2] < cfg.near || b[2] < cfg.near) {
      if (a[2] < cfg.near) std::swap(a, b);  // a is in front
      const double t = (a[2] - cfg.near) / (a[2] - b[2]);
      for (int i = 0; i < 3; ++i) b[i] = a[i] + t * (b[i] - a[i]);
      b[2] = cfg.near;
    }
    double u0 = f * a[0] / a[2] + cx, v0 = f * a[1] / a[2] + cy;
    double u1 = f * b[0] / b[2] + cx, v1 = f * b[1] / b[2] + cy;
    if (!clip_box(u0, v0, u1, v1, -0.5, -0.5, cfg.width - 0.5, cfg.height - 0.5)) continue;
    const double span = std::max(std::abs(u1 - u0), std::abs(v1 - v0));
    const auto steps = static_cast<long>(std::ceil(span)) + 1;
    for (long k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps);
      const long x = std::lround(u0 + t * (u1 - u0));
      const long y = std::lround(v0 + t * (v1 - v0));
      if (x < 0 || y < 0 || x >= cfg.width || y >= cfg.height) continue;
      mask[static_cast<std::size_t>(y) * cfg.width + static_cast<std::size_t>(x)] = 1;
    }
  }
  return mask;
}

Dataset generate_dataset(const SceneConfig& cfg) {
  cfg.validate();
  Dataset out;
  const std::size_t n = cfg.pose_count();
  out.poses.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.poses.push_back(pose_at(cfg.trajectory, static_cast<double>(k) / cfg.rate_hz));
  }

  Rng rng(cfg.seed);
  std::vector<std::uint8_t> prev = render_edge_frame(cfg, out.poses[0]);
  std::vector<Event> interval;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t0 = out.poses[k].t, t1 = out.poses[k + 1].t;
    std::vector<std::uint8_t> next = render_edge_frame(cfg, out.poses[k + 1]);
    interval.clear();
    for (std::size_t i = 0; i < next.size(); ++i) {
      if (next[i] == prev[i]) continue;
      // 1 - u lies in (0, 1], so t lands in (t0, t1].
      double t = t0 + (1.0 - rng.uniform()) * (t1 - t0);
      t = std::min(std::max(t, std::nextafter(t0, t1)), t1);
      interval.push_back({t, static_cast<int>(i % cfg.width), static_cast<int>(i / cfg.width),
                          next[i] ? 1 : -1});
    }
    std::stable_sort(interval.begin(), interval.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    out.events.insert(out.events.end(), interval.begin(), interval.end());
    prev = std::move(next);
  }

  std::ostringstream ev, gt;
  io::write_events(ev, out.events);
  io::write_poses(gt, out.poses);
  out.events_text = ev.str();
  out.groundtruth_text = gt.str();
  return out;
}

SceneConfig scene_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  // Start from the default scene so a config only has to name what it changes.
  SceneConfig s = SceneConfig::default_scene();
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.focal_px = j.value("focal_px", s.focal_px);
    if (j.contains("cx")) s.cx = j["cx"].get<double>();
    if (j.contains("cy")) s.cy = j["cy"].get<double>();
    s.near = j.value("near", s.near);
    s.rate_hz = j.value("rate_hz", s.rate_hz);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.seed = j.value("seed", s.seed);
    if (j.contains("segments")) {
      s.segments.clear();
      for (const auto& seg : j["segments"]) {
        s.segments.push_back({vec3_from(seg.at("a")), vec3_from(seg.at("b"))});
      }
    }
    if (j.contains("trajectory")) {
      const auto& t = j["trajectory"];
      if (t.contains("position")) s.trajectory.position = motion_from(t["position"], s.trajectory.position);
      if (t.contains("rotation_deg")) {
        s.trajectory.rotation_deg = motion_from(t["rotation_deg"], s.trajectory.rotation_deg);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scene config: ") + e.what());
  }
  s.validate();
  return s;
}

std::string scene_to_json(const SceneConfig& s) {
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment& seg : s.segments) segs.push_back({{"a", seg.a}, {"b", seg.b}});
  nlohmann::json j = {{"width", s.width},
                      {"height", s.height},
                      {"focal_px", s.focal_px},
                      {"near", s.near},
                      {"rate_hz", s.rate_hz},
                      {"duration_s", s.duration_s},
                      {"seed", s.seed},
                      {"segments", segs},
                      {"trajectory",
                       {{"position", motion_json(s.trajectory.position)},
                        {"rotation_deg", motion_json(s.trajectory.rotation_deg)}}}};
  if (s.cx) j["cx"] = *s.cx;
  if (s.cy) j["cy"] = *s.cy;
  return j.dump(2);
}

}  // namespace evpose::synth
