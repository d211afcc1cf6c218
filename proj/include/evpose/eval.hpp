// Copyright 2026 The evpose Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "evpose/event_io.hpp"
#include "evpose/model.hpp"

namespace evpose::eval {

using model::PosePrediction;

struct ErrorSummary {
  double median = 0.0;
  double mean = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  std::size_t n = 0;

  bool operator==(const ErrorSummary&) const = default;
};

struct SampleError {
  double position = 0.0;     ///< meters
  double orientation = 0.0;  ///< degrees

  bool operator==(const SampleError&) const = default;
};

struct EvalReport {
  ErrorSummary position;
  ErrorSummary orientation;
  std::vector<SampleError> per_sample_errors;
};

struct RobustnessRow {
  double fraction = 1.0;
  double position_median = 0.0;
  double orientation_median = 0.0;
};

struct RobustnessTable {
  std::vector<RobustnessRow> rows;
};

/// Euclidean distance between predicted and true positions.
double position_error(const PosePrediction& pred, const PoseLabel& label);
double position_error(const Vec3& a, const Vec3& b);

/// Rotation angle in degrees between two unit quaternions,
/// 2 acos(min(1, |a.b|)), so q and -q compare equal. Throws RangeError if
/// either input is off unit length by more than 1e-6.
double orientation_error(const PosePrediction& pred, const PoseLabel& label);
double orientation_error(const Quaternion& a, const Quaternion& b);

/// Quartiles by linear interpolation between closest ranks (position
/// (n-1)p in the sorted list); arithmetic mean. Throws InsufficientDataError
/// on empty input.
ErrorSummary summarize(std::span<const double> errors);

/// Anything that maps an image to a pose. Lets tests swap in oracle stubs.
using Predictor = std::function<PosePrediction(const EventImage&, const EventWindow&)>;

Predictor model_predictor(const model::ModelParams& params);

/// Predicts every window from its full event image and aggregates both
/// metrics. Throws InsufficientDataError on an empty set.
EvalReport evaluate(const Predictor& predictor, std::span<const EventWindow> windows,
                    SensorSize sensor);
EvalReport evaluate(const model::ModelParams& params, std::span<const EventWindow> windows);

/// The event fractions 0.1, 0.2, ..., 1.0.
std::vector<double> default_fractions();

/// Re-evaluates the windows with only the newest fraction of their events.
/// Fractions must be strictly increasing and end at 1.0.
RobustnessTable robustness_experiment(const Predictor& predictor,
                                      std::span<const EventWindow> windows, SensorSize sensor,
                                      std::span<const double> fractions);
RobustnessTable robustness_experiment(const model::ModelParams& params,
                                      std::span<const EventWindow> windows,
                                      std::span<const double> fractions);

/// One row per sample: index,position_error_m,orientation_error_deg.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// JSON object with "position" and "orientation" summaries.
void write_report_json(std::ostream& out, const EvalReport& report);
/// fraction,position_median_m,orientation_median_deg.
void write_robustness_csv(std::ostream& out, const RobustnessTable& table);

}  // namespace evpose::eval
