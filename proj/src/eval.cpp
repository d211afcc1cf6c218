// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#include "evpose/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <json.hpp>

#include "evpose/error.hpp"
#include "evpose/event_image.hpp"

namespace evpose::eval {
namespace {

double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

void check_unit(const Quaternion& q) {
  double n2 = 0.0;
  for (double c : q) n2 += c * c;
  if (!(std::abs(std::sqrt(n2) - 1.0) <= 1e-6)) {
    throw RangeError("orientation_error: quaternion is not unit length");
  }
}

nlohmann::json summary_json(const ErrorSummary& s) {
  return {{"median", s.median}, {"mean", s.mean}, {"q1", s.q1},
          {"q3", s.q3},         {"max", s.max},   {"n", s.n}};
}

}  // namespace

double position_error(const Vec3& a, const Vec3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double position_error(const PosePrediction& pred, const PoseLabel& label) {
  return position_error(pred.p_hat, label.p);
}

double orientation_error(const Quaternion& a, const Quaternion& b) {
  check_unit(a);
  check_unit(b);
  // 2*acos(|a.b|) written as 4*atan2(|a-b|, |a+b|) with the nearer of the
  // two double-cover representatives, which stays accurate near 0 and 180.
  double diff = 0.0, sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    sum += (a[i] + b[i]) * (a[i] + b[i]);
  }
  const double near = std::sqrt(std::min(diff, sum));
  const double far = std::sqrt(std::max(diff, sum));
  return 4.0 * std::atan2(near, far) * 180.0 / std::numbers::pi;
}

double orientation_error(const PosePrediction& pred, const PoseLabel& label) {
  return orientation_error(pred.q_hat, label.q);
}

ErrorSummary summarize(std::span<const double> errors) {
  if (errors.empty()) throw InsufficientDataError("summarize: no errors to summarize");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  ErrorSummary s;
  s.n = sorted.size();
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.max = sorted.back();
  double acc = 0.0;
  for (double v : errors) acc += v;
  s.mean = acc / static_cast<double>(s.n);
  return s;
}

Predictor model_predictor(const model::ModelParams& params) {
  return [&params](const EventImage& img, const EventWindow&) {
    return model::predict(img, params);
  };
}

EvalReport evaluate(const Predictor& predictor, std::span<const EventWindow> windows,
                    SensorSize sensor) {
  if (windows.empty()) throw InsufficientDataError("evaluate: empty test set");
  EvalReport report;
  report.per_sample_errors.reserve(windows.size());
  std::vector<double> pos, ori;
  for (const EventWindow& w : windows) {
    const EventImage img = image::build_window_image(w, sensor, 1.0);
    const PosePrediction pred = predictor(img, w);
    SampleError e{position_error(pred, w.label), orientation_error(pred, w.label)};
    report.per_sample_errors.push_back(e);
    pos.push_back(e.position);
    ori.push_back(e.orientation);
  }
  report.position = summarize(pos);
  report.orientation = summarize(ori);
  return report;
}

EvalReport evaluate(const model::ModelParams& params, std::span<const EventWindow> windows) {
  const SensorSize sensor{static_cast<int>(params.config.input_w),
                          static_cast<int>(params.config.input_h)};
  return evaluate(model_predictor(params), windows, sensor);
}

std::vector<double> default_fractions() {
  std::vector<double> f;
  for (int i = 1; i <= 10; ++i) f.push_back(i / 10.0);
  return f;
}

RobustnessTable robustness_experiment(const Predictor& predictor,
                                      std::span<const EventWindow> windows, SensorSize sensor,
                                      std::span<const double> fractions) {
  if (fractions.empty() || fractions.back() != 1.0) {
    throw RangeError("robustness fractions must end at 1.0");
  }
  for (std::size_t i = 1; i < fractions.size(); ++i) {
    if (!(fractions[i] > fractions[i - 1])) {
      throw RangeError("robustness fractions must be strictly increasing");
    }
  }
  if (windows.empty()) throw InsufficientDataError("robustness_experiment: empty test set");

  RobustnessTable table;
  for (double fraction : fractions) {
    std::vector<double> pos, ori;
    for (const EventWindow& w : windows) {
      const EventImage img = image::build_window_image(w, sensor, fraction);
      const PosePrediction pred = predictor(img, w);
      pos.push_back(position_error(pred, w.label));
      ori.push_back(orientation_error(pred, w.label));
    }
    table.rows.push_back({fraction, summarize(pos).median, summarize(ori).median});
  }
  return table;
}

RobustnessTable robustness_experiment(const model::ModelParams& params,
                                      std::span<const EventWindow> windows,
                                      std::span<const double> fractions) {
  const SensorSize sensor{static_cast<int>(params.config.input_w),
                          static_cast<int>(params.config.input_h)};
  return robustness_experiment(model_predictor(params), windows, sensor, fractions);
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "index,position_error_m,orientation_error_deg\n";
  for (std::size_t i = 0; i < report.per_sample_errors.size(); ++i) {
    const SampleError& e = report.per_sample_errors[i];
    out << i << ',' << io::format_real(e.position) << ',' << io::format_real(e.orientation)
        << '\n';
  }
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  const nlohmann::json j = {{"position", summary_json(report.position)},
                            {"orientation", summary_json(report.orientation)},
                            {"units", {{"position", "m"}, {"orientation", "deg"}}}};
  out << j.dump(2) << '\n';
}

void write_robustness_csv(std::ostream& out, const RobustnessTable& table) {
  out << "fraction,position_median_m,orientation_median_deg\n";
  for (const RobustnessRow& r : table.rows) {
    out << io::format_real(r.fraction) << ',' << io::format_real(r.position_median) << ','
        << io::format_real(r.orientation_median) << '\n';
  }
}

}  // namespace evpose::eval
