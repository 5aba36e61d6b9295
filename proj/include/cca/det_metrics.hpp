// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cca::metrics {

struct Box {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool valid() const { return x_max > x_min && y_max > y_min; }
  double area() const { return (x_max - x_min) * (y_max - y_min); }
};

struct DetectionBox {
  int class_id = 0;
  double confidence = 0;
  Box box;
};

struct GroundTruthBox {
  int class_id = 0;
  Box box;
};

double iou(const Box& a, const Box& b);

/// Outcome of matching one class's detections against its ground truths.
struct MatchResult {
  std::vector<bool> true_positive;  // per detection, in confidence order
  std::vector<double> confidence;   // sorted descending
  std::size_t false_negatives = 0;
  std::size_t ground_truths = 0;

  std::size_t tp() const;
  std::size_t fp() const { return true_positive.size() - tp(); }
};

/// Stable sort by confidence, descending; equal confidences keep input order.
std::vector<DetectionBox> sort_by_confidence(std::span<const DetectionBox> dets);

/// Greedy matching in confidence order. Each detection takes the unmatched
/// ground truth of highest IoU (first on ties) if that IoU reaches the
/// threshold; otherwise it is a false positive. Class ids are ignored, so
/// callers pass one class at a time.
MatchResult match_detections(std::span<const DetectionBox> dets,
                             std::span<const GroundTruthBox> gts, double iou_threshold);

struct PrPoint {
  double recall = 0, precision = 0, confidence = 0;
};

/// Cumulative precision/recall after each detection, confidence descending.
struct PrCurve {
  std::vector<PrPoint> points;
  std::size_t ground_truths = 0;
};

PrCurve pr_curve(const std::vector<bool>& true_positive, std::span<const double> confidence,
                 std::size_t ground_truths);
inline PrCurve pr_curve(const MatchResult& m) {
  return pr_curve(m.true_positive, m.confidence, m.ground_truths);
}

enum class Interpolation { all_points, points101 };

/// Area under the precision envelope (precision at recall r is the maximum
/// precision at any recall >= r). No ground truths gives 0.
double average_precision(const PrCurve& curve,
                         Interpolation mode = Interpolation::all_points);

/// Unweighted mean; throws std::invalid_argument on an empty list.
double mean_ap(std::span<const double> per_class_ap);

struct ClassAp {
  int class_id = 0;
  double ap = 0;
};

/// Per-class AP at one IoU threshold, classes in ascending id order. Classes
/// with neither ground truths nor detections are omitted.
std::vector<ClassAp> per_class_ap(std::span<const DetectionBox> dets,
                                  std::span<const GroundTruthBox> gts, double iou_threshold,
                                  Interpolation mode = Interpolation::all_points);

/// mAP at one IoU threshold.
double map_at(std::span<const DetectionBox> dets, std::span<const GroundTruthBox> gts,
              double iou_threshold, Interpolation mode = Interpolation::all_points);

/// 0.50, 0.55, ..., 0.95.
std::vector<double> coco_thresholds();

/// Mean of mAP over the given IoU thresholds (default 0.50:0.05:0.95).
double map_range(std::span<const DetectionBox> dets, std::span<const GroundTruthBox> gts,
                 std::span<const double> thresholds = {},
                 Interpolation mode = Interpolation::all_points);

}  // namespace cca::metrics
