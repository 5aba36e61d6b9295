// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/det_metrics.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace cca::metrics {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::size_t MatchResult::tp() const {
  return std::size_t(std::count(true_positive.begin(), true_positive.end(), true));
}

std::vector<DetectionBox> sort_by_confidence(std::span<const DetectionBox> dets) {
  std::vector<DetectionBox> out(dets.begin(), dets.end());
  std::stable_sort(out.begin(), out.end(), [](const DetectionBox& a, const DetectionBox& b) {
    return a.confidence > b.confidence;
  });
  return out;
}

MatchResult match_detections(std::span<const DetectionBox> dets,
                             std::span<const GroundTruthBox> gts, double iou_threshold) {
  const auto sorted = sort_by_confidence(dets);
  MatchResult r;
  r.ground_truths = gts.size();
  std::vector<bool> taken(gts.size(), false);
  for (const auto& d : sorted) {
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(d.box, gts[g].box);
      if (v >= iou_threshold && v > best_iou) {
        best = long(g);
        best_iou = v;
      }
    }
    if (best >= 0) taken[std::size_t(best)] = true;
    r.true_positive.push_back(best >= 0);
    r.confidence.push_back(d.confidence);
  }
  r.false_negatives = std::size_t(std::count(taken.begin(), taken.end(), false));
  return r;
}

PrCurve pr_curve(const std::vector<bool>& true_positive, std::span<const double> confidence,
                 std::size_t ground_truths) {
  if (true_positive.size() != confidence.size()) {
    throw std::invalid_argument("pr_curve: label and confidence counts differ");
  }
  PrCurve c;
  c.ground_truths = ground_truths;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < true_positive.size(); ++i) {
    if (true_positive[i]) ++tp;
    const double precision = double(tp) / double(i + 1);
    const double recall = ground_truths == 0 ? 0.0 : double(tp) / double(ground_truths);
    c.points.push_back({recall, precision, confidence[i]});
  }
  return c;
}

double average_precision(const PrCurve& curve, Interpolation mode) {
  if (curve.ground_truths == 0 || curve.points.empty()) return 0.0;
  const auto& pts = curve.points;
  // envelope[i] = max precision over points i..end
  std::vector<double> envelope(pts.size());
  double running = 0.0;
  for (std::size_t i = pts.size(); i-- > 0;) {
    running = std::max(running, pts[i].precision);
    envelope[i] = running;
  }
  if (mode == Interpolation::all_points) {
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ap += (pts[i].recall - prev_recall) * envelope[i];
      prev_recall = pts[i].recall;
    }
    return ap;
  }
  double sum = 0.0;
  std::size_t i = 0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    while (i < pts.size() && pts[i].recall < r) ++i;
    sum += i < pts.size() ? envelope[i] : 0.0;
  }
  return sum / 101.0;
}

double mean_ap(std::span<const double> per_class_ap) {
  if (per_class_ap.empty()) throw std::invalid_argument("mean_ap: no classes to average");
  return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) /
         double(per_class_ap.size());
}

std::vector<ClassAp> per_class_ap(std::span<const DetectionBox> dets,
                                  std::span<const GroundTruthBox> gts, double iou_threshold,
                                  Interpolation mode) {
  std::map<int, std::pair<std::vector<DetectionBox>, std::vector<GroundTruthBox>>> by_class;
  for (const auto& d : dets) by_class[d.class_id].first.push_back(d);
  for (const auto& g : gts) by_class[g.class_id].second.push_back(g);
  std::vector<ClassAp> out;
  for (const auto& [id, group] : by_class) {
    const auto m = match_detections(group.first, group.second, iou_threshold);
    out.push_back({id, average_precision(pr_curve(m), mode)});
  }
  return out;
}

double map_at(std::span<const DetectionBox> dets, std::span<const GroundTruthBox> gts,
              double iou_threshold, Interpolation mode) {
  const auto classes = per_class_ap(dets, gts, iou_threshold, mode);
  std::vector<double> aps;
  for (const auto& c : classes) aps.push_back(c.ap);
  return mean_ap(aps);
}

std::vector<double> coco_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

double map_range(std::span<const DetectionBox> dets, std::span<const GroundTruthBox> gts,
                 std::span<const double> thresholds, Interpolation mode) {
  const std::vector<double> defaults = coco_thresholds();
  if (thresholds.empty()) thresholds = defaults;
  double sum = 0.0;
  for (double t : thresholds) sum += map_at(dets, gts, t, mode);
  return sum / double(thresholds.size());
}

}  // namespace cca::metrics
