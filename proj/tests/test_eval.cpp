// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "evpose/error.hpp"
#include "evpose/eval.hpp"
#include "evpose/event_image.hpp"
#include "evpose/rng.hpp"

using namespace evpose;
using model::PosePrediction;

namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation_matrix(const Quaternion& q) {
  const double x = q[0], y = q[1], z = q[2], w = q[3];
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

// Geodesic angle from the trace of R_a^T R_b.
double matrix_angle_deg(const Quaternion& a, const Quaternion& b) {
  const Mat3 ra = rotation_matrix(a), rb = rotation_matrix(b);
  double trace = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) trace += ra[k][i] * rb[k][i];
  }
  const double c = std::clamp((trace - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

Quaternion random_unit(Rng& rng) {
  Quaternion q;
  double n = 0.0;
  do {
    n = 0.0;
    for (double& c : q) {
      c = rng.uniform(-1.0, 1.0);
      n += c * c;
    }
  } while (n < 1e-6 || n > 1.0);
  for (double& c : q) c /= std::sqrt(n);
  return q;
}

std::vector<EventWindow> random_windows(Rng& rng, std::size_t n, SensorSize s) {
  std::vector<EventWindow> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto& w = out[k];
    w.sequence_index = k;
    w.label.t = static_cast<double>(k + 1);
    w.label.p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    w.label.q = io::canonicalize_quaternion(random_unit(rng));
    const std::size_t m = 1 + rng.below(30);
    for (std::size_t i = 0; i < m; ++i) {
      w.events.push_back({static_cast<double>(k) + 0.01 * static_cast<double>(i + 1),
                          static_cast<int>(rng.below(s.width)),
                          static_cast<int>(rng.below(s.height)), rng.below(2) ? 1 : -1});
    }
  }
  return out;
}

PosePrediction exact(const EventWindow& w) {
  return {w.label.p, w.label.q, w.label.q};
}

}  // namespace

TEST_CASE("position_error is Euclidean") {
  CHECK(eval::position_error(Vec3{3, 4, 0}, Vec3{0, 0, 0}) == 5.0);
  CHECK(eval::position_error(Vec3{1, 1, 1}, Vec3{1, 1, 1}) == 0.0);
}

TEST_CASE("orientation_error examples") {
  const Quaternion id{0, 0, 0, 1};
  const double s = std::sqrt(0.5);
  const Quaternion z90{0, 0, s, s};
  CHECK(eval::orientation_error(id, id) == 0.0);
  CHECK(std::abs(eval::orientation_error(id, z90) - 90.0) <= 1e-9);
  CHECK(std::abs(eval::orientation_error(id, z90) - matrix_angle_deg(id, z90)) <= 1e-9);
  CHECK(eval::orientation_error(z90, Quaternion{0, 0, -s, -s}) == 0.0);
  CHECK_THROWS_AS(eval::orientation_error(id, Quaternion{0, 0, 0, 2}), RangeError);
}

TEST_CASE("orientation_error matches the rotation-matrix oracle") {
  Rng rng(55);
  for (int i = 0; i < 300; ++i) {
    const Quaternion a = random_unit(rng), b = random_unit(rng);
    const double e = eval::orientation_error(a, b);
    CHECK(e >= 0.0);
    CHECK(e <= 180.0);
    // The trace form loses precision near 0 and 180 degrees.
    CHECK(std::abs(e - matrix_angle_deg(a, b)) <= 1e-5);
    Quaternion neg = a;
    for (double& c : neg) c = -c;
    CHECK(eval::orientation_error(a, neg) == 0.0);
  }
}

TEST_CASE("summarize examples") {
  const std::vector<double> a{1, 2, 3, 4};
  const auto s = eval::summarize(a);
  CHECK(s.median == 2.5);
  CHECK(s.mean == 2.5);
  CHECK(s.q1 == 1.75);
  CHECK(s.q3 == 3.25);
  CHECK(s.max == 4.0);
  CHECK(s.n == 4);

  const std::vector<double> one{7.0};
  const auto t = eval::summarize(one);
  CHECK(t.median == 7.0);
  CHECK(t.q1 == 7.0);
  CHECK(t.q3 == 7.0);

  CHECK_THROWS_AS(eval::summarize(std::vector<double>{}), InsufficientDataError);
}

TEST_CASE("summarize averages the published per-sequence medians") {
  const std::vector<double> pos{0.025, 0.036, 0.035, 0.031, 0.051, 0.036};
  const std::vector<double> ori{2.256, 2.195, 2.117, 2.047, 3.354, 2.074};
  CHECK(std::abs(eval::summarize(pos).mean - 0.036) <= 0.0005);
  CHECK(std::abs(eval::summarize(ori).mean - 2.341) <= 0.0005 + 1e-12);
}

TEST_CASE("summarize is permutation invariant and scales linearly") {
  Rng rng(6);
  std::vector<double> v(31);
  for (double& x : v) x = rng.uniform(0.0, 10.0);
  std::vector<double> p = v;
  std::reverse(p.begin(), p.end());
  std::swap(p[3], p[17]);
  const auto a = eval::summarize(v), b = eval::summarize(p);
  CHECK(a.median == b.median);
  CHECK(a.q1 == b.q1);
  CHECK(a.q3 == b.q3);
  CHECK(a.mean == doctest::Approx(b.mean).epsilon(1e-14));
  std::vector<double> scaled = v;
  for (double& x : scaled) x *= 4.0;
  const auto c = eval::summarize(scaled);
  CHECK(c.median == 4.0 * a.median);
  CHECK(c.max == 4.0 * a.max);
  CHECK(c.mean == doctest::Approx(4.0 * a.mean).epsilon(1e-14));
}

TEST_CASE("a perfect predictor scores zero") {
  Rng rng(8);
  const SensorSize s{16, 12};
  const auto windows = random_windows(rng, 20, s);
  const eval::Predictor perfect = [](const EventImage&, const EventWindow& w) { return exact(w); };
  const auto report = eval::evaluate(perfect, windows, s);
  CHECK(report.position.median == 0.0);
  CHECK(report.orientation.max == 0.0);
  CHECK(report.per_sample_errors.size() == 20);

  const auto table = eval::robustness_experiment(perfect, windows, s, eval::default_fractions());
  REQUIRE(table.rows.size() == 10);
  for (const auto& r : table.rows) {
    CHECK(r.position_median == 0.0);
    CHECK(r.orientation_median == 0.0);
  }
  CHECK(table.rows.front().fraction == 0.1);
  CHECK(table.rows.back().fraction == 1.0);
}

TEST_CASE("evaluate rejects an empty test set") {
  const eval::Predictor perfect = [](const EventImage&, const EventWindow& w) { return exact(w); };
  CHECK_THROWS_AS(eval::evaluate(perfect, {}, {4, 4}), InsufficientDataError);
}

TEST_CASE("robustness rows see the selected events and end at evaluate") {
  Rng rng(12);
  const SensorSize s{8, 8};
  const auto windows = random_windows(rng, 15, s);
  // Position error equals the number of non-background pixels.
  const eval::Predictor counting = [](const EventImage& img, const EventWindow& w) {
    PosePrediction p = exact(w);
    p.p_hat[0] += static_cast<double>(
        std::count_if(img.pixels.begin(), img.pixels.end(), [](double v) { return v != 0.5; }));
    return p;
  };
  const auto table = eval::robustness_experiment(counting, windows, s, eval::default_fractions());
  const auto full = eval::evaluate(counting, windows, s);
  CHECK(table.rows.back().position_median == full.position.median);
  CHECK(table.rows.back().orientation_median == full.orientation.median);
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    CHECK(table.rows[i].position_median >= table.rows[i - 1].position_median);
  }

  const std::vector<double> bad{0.5, 0.9};
  CHECK_THROWS_AS(eval::robustness_experiment(counting, windows, s, bad), RangeError);
  const std::vector<double> unordered{0.5, 0.3, 1.0};
  CHECK_THROWS_AS(eval::robustness_experiment(counting, windows, s, unordered), RangeError);
}

TEST_CASE("model-backed evaluate and robustness agree at fraction one") {
  Rng rng(4);
  auto params = model::init_params(model::ModelConfig::toy(), 1);
  params.fc2_b.mutable_data()[6] = 1.0;  // keep qw away from zero
  const auto windows = random_windows(rng, 6, {8, 8});
  const auto report = eval::evaluate(params, windows);
  const auto table = eval::robustness_experiment(params, windows, eval::default_fractions());
  CHECK(table.rows.back().position_median == report.position.median);
  CHECK(table.rows.back().orientation_median == report.orientation.median);
}

TEST_CASE("report writers") {
  eval::EvalReport r;
  r.per_sample_errors = {{0.5, 10.0}, {1.5, 20.0}};
  r.position = eval::summarize(std::vector<double>{0.5, 1.5});
  r.orientation = eval::summarize(std::vector<double>{10.0, 20.0});
  std::ostringstream csv, js;
  eval::write_report_csv(csv, r);
  CHECK(csv.str() == "index,position_error_m,orientation_error_deg\n0,0.5,10\n1,1.5,20\n");
  eval::write_report_json(js, r);
  const auto j = nlohmann::json::parse(js.str());
  CHECK(j["position"]["median"].get<double>() == 1.0);
  CHECK(j["orientation"]["n"].get<int>() == 2);
  CHECK(j["units"]["orientation"] == "deg");

  eval::RobustnessTable t;
  t.rows = {{0.5, 0.25, 3.0}, {1.0, 0.125, 2.0}};
  std::ostringstream rc;
  eval::write_robustness_csv(rc, t);
  CHECK(rc.str() == "fraction,position_median_m,orientation_median_deg\n0.5,0.25,3\n1,0.125,2\n");
}
