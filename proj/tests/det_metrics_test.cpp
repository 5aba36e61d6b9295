// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/det_metrics.hpp"
#include "cca/random.hpp"
#include "oracle/naive.hpp"

#include <doctest.h>

using namespace cca::metrics;
using cca::Rng;

namespace {

Box random_box(Rng& rng, double extent = 10.0) {
  const double x = rng.uniform(0, extent), y = rng.uniform(0, extent);
  return {x, y, x + rng.uniform(0.5, 4.0), y + rng.uniform(0.5, 4.0)};
}

// Jittered copy, so matches span a range of IoU values.
Box jitter(const Box& b, Rng& rng, double amount) {
  return {b.x_min + rng.uniform(-amount, amount), b.y_min + rng.uniform(-amount, amount),
          b.x_max + rng.uniform(-amount, amount), b.y_max + rng.uniform(-amount, amount)};
}

struct Scene {
  std::vector<DetectionBox> dets;
  std::vector<GroundTruthBox> gts;
};

Scene random_scene(Rng& rng, int classes, std::size_t n_gt, std::size_t n_det) {
  Scene s;
  for (std::size_t i = 0; i < n_gt; ++i) s.gts.push_back({int(rng.index(std::size_t(classes))), random_box(rng)});
  for (std::size_t i = 0; i < n_det; ++i) {
    DetectionBox d;
    if (!s.gts.empty() && rng.uniform() < 0.7) {
      const auto& g = s.gts[rng.index(s.gts.size())];
      d.class_id = g.class_id;
      Box b = jitter(g.box, rng, 0.6);
      if (!b.valid()) b = g.box;
      d.box = b;
    } else {
      d.class_id = int(rng.index(std::size_t(classes)));
      d.box = random_box(rng);
    }
    d.confidence = std::round(rng.uniform() * 20.0) / 20.0;  // coarse, so ties occur
    s.dets.push_back(d);
  }
  return s;
}

std::vector<double> confidences(std::size_t n) {
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = 1.0 - double(i) / double(n + 1);
  return c;
}

double ap_of(const std::vector<bool>& labels, std::size_t n_gt,
             Interpolation mode = Interpolation::all_points) {
  return average_precision(pr_curve(labels, confidences(labels.size()), n_gt), mode);
}

}  // namespace

TEST_CASE("iou: analytic cases and symmetry") {
  const Box a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {5, 5, 6, 6}) == 0.0);
  CHECK(iou(a, {2, 0, 4, 2}) == 0.0);  // shared edge only
  CHECK(iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Box p = random_box(rng), q = random_box(rng);
    const double v = iou(p, q);
    CHECK(v == iou(q, p));
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == doctest::Approx(cca::oracle::iou(p, q)).epsilon(1e-14));
  }
}

TEST_CASE("match_detections: single and duplicate detections") {
  const std::vector<GroundTruthBox> gt{{0, {0, 0, 2, 2}}};
  std::vector<DetectionBox> dets{{0, 0.9, {0, 0, 2, 2}}};
  auto m = match_detections(dets, gt, 0.5);
  CHECK(m.tp() == 1);
  CHECK(m.fp() == 0);
  CHECK(m.false_negatives == 0);
  const auto curve = pr_curve(m);
  CHECK(curve.points.back().precision == 1.0);
  CHECK(curve.points.back().recall == 1.0);

  dets = {{0, 0.3, {0, 0, 2, 2.1}}, {0, 0.8, {0, 0, 2.1, 2}}};
  m = match_detections(dets, gt, 0.5);
  CHECK(m.true_positive == std::vector<bool>{true, false});
  CHECK(m.confidence == std::vector<double>{0.8, 0.3});
  CHECK(m.false_negatives == 0);

  m = match_detections({}, gt, 0.5);
  CHECK(m.false_negatives == 1);
  CHECK(m.tp() == 0);
}

TEST_CASE("match_detections: equals the greedy oracle on 20 detections / 10 ground truths") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const auto s = random_scene(rng, 1, 10, 20);
    for (double thr : {0.3, 0.5, 0.75}) {
      const auto m = match_detections(s.dets, s.gts, thr);
      CHECK(m.true_positive == cca::oracle::greedy_match(s.dets, s.gts, thr));
      CHECK(m.false_negatives == 10 - m.tp());
    }
  }
}

TEST_CASE("sort_by_confidence: stable on ties") {
  const std::vector<DetectionBox> d{{0, 0.5, {}}, {1, 0.9, {}}, {2, 0.5, {}}, {3, 0.9, {}}};
  const auto s = sort_by_confidence(d);
  std::vector<int> order;
  for (const auto& x : s) order.push_back(x.class_id);
  CHECK(order == std::vector<int>{1, 3, 0, 2});
}

TEST_CASE("average_precision: analytic cases") {
  CHECK(ap_of({true, true, true}, 3) == 1.0);
  CHECK(ap_of({}, 3) == 0.0);
  CHECK(ap_of({}, 0) == 0.0);
  CHECK(ap_of({false, false}, 2) == 0.0);
  // P = 1, 1/2, 2/3, 1/2, 3/5 at R = 1/3, 1/3, 2/3, 2/3, 1; envelope 1, 2/3, 3/5
  const std::vector<bool> labels{true, false, true, false, true};
  const auto curve = pr_curve(labels, confidences(5), 3);
  const double p[] = {1.0, 0.5, 2.0 / 3.0, 0.5, 0.6};
  const double r[] = {1.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0, 1.0};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(curve.points[i].precision == doctest::Approx(p[i]).epsilon(1e-15));
    CHECK(curve.points[i].recall == doctest::Approx(r[i]).epsilon(1e-15));
  }
  CHECK(std::abs(average_precision(curve) - 34.0 / 45.0) <= 1e-9);
  CHECK(std::abs(cca::oracle::ap_enumerated(labels, 3) - 34.0 / 45.0) <= 1e-12);
}

TEST_CASE("average_precision: 101-point interpolation") {
  CHECK(ap_of({true, true}, 2, Interpolation::points101) == 1.0);
  // envelope 1 up to recall 1/2, then nothing: 51 of 101 sample points
  CHECK(ap_of({true}, 2, Interpolation::points101) == doctest::Approx(51.0 / 101.0).epsilon(1e-15));
  const double a = ap_of({true, false, true, false, true}, 3, Interpolation::points101);
  CHECK(std::abs(a - 34.0 / 45.0) <= 0.02);
}

TEST_CASE("average_precision: properties over random label sequences") {
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    Rng rng(seed);
    const std::size_t n = rng.index(15);
    std::vector<bool> labels(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += (labels[i] = rng.uniform() < 0.5);
    const std::size_t n_gt = hits + rng.index(4);
    const double ap = ap_of(labels, n_gt);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    CHECK(std::abs(ap - cca::oracle::ap_enumerated(labels, n_gt)) <= 1e-12);

    const auto curve = pr_curve(labels, confidences(n), n_gt);
    for (std::size_t i = 1; i < curve.points.size(); ++i)
      CHECK(curve.points[i].recall >= curve.points[i - 1].recall);
    // the envelope never increases with recall
    std::vector<double> env(curve.points.size());
    double best = 0;
    for (std::size_t i = curve.points.size(); i-- > 0;) env[i] = best = std::max(best, curve.points[i].precision);
    for (std::size_t i = 1; i < env.size(); ++i)
      if (curve.points[i].recall > curve.points[i - 1].recall) CHECK(env[i] <= env[i - 1]);

    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] || hits == n_gt) continue;
      auto flipped = labels;
      flipped[i] = true;
      CHECK(ap_of(flipped, n_gt) >= ap - 1e-12);
    }
  }
}

TEST_CASE("mean_ap and per-class evaluation") {
  CHECK(mean_ap(std::vector<double>{0.42}) == 0.42);
  CHECK(mean_ap(std::vector<double>{1.0, 0.0}) == 0.5);
  CHECK_THROWS_AS(mean_ap({}), std::invalid_argument);

  const std::vector<GroundTruthBox> gts{{0, {0, 0, 2, 2}}, {1, {4, 4, 6, 6}}, {1, {7, 7, 9, 9}}};
  const std::vector<DetectionBox> dets{{0, 0.9, {0, 0, 2, 2}}, {1, 0.8, {4, 4, 6, 6}}};
  const auto per = per_class_ap(dets, gts, 0.5);
  REQUIRE(per.size() == 2);
  CHECK(per[0].class_id == 0);
  CHECK(per[0].ap == 1.0);
  CHECK(per[1].ap == 0.5);
  CHECK(map_at(dets, gts, 0.5) == 0.75);
  CHECK(map_at(std::vector<DetectionBox>{}, gts, 0.5) == 0.0);
  CHECK_THROWS_AS(map_at({}, {}, 0.5), std::invalid_argument);

  // a class with only false detections contributes zero
  const std::vector<DetectionBox> stray{{0, 0.9, {0, 0, 2, 2}}, {5, 0.7, {0, 0, 1, 1}}};
  const std::vector<GroundTruthBox> one{{0, {0, 0, 2, 2}}};
  CHECK(map_at(stray, one, 0.5) == 0.5);
}

TEST_CASE("map_range: perfect detections and threshold ordering") {
  const auto t = coco_thresholds();
  REQUIRE(t.size() == 10);
  CHECK(t.front() == 0.5);
  CHECK(t.back() == doctest::Approx(0.95).epsilon(1e-15));

  Rng rng(9);
  const auto s = random_scene(rng, 3, 12, 0);
  std::vector<DetectionBox> perfect;
  for (std::size_t i = 0; i < s.gts.size(); ++i) perfect.push_back({s.gts[i].class_id, 1.0 - 0.01 * double(i), s.gts[i].box});
  CHECK(map_range(perfect, s.gts) == 1.0);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r(seed);
    const auto sc = random_scene(r, 3, 1 + r.index(12), r.index(30));
    CAPTURE(seed);
    CHECK(map_at(sc.dets, sc.gts, 0.5) >= map_range(sc.dets, sc.gts) - 1e-12);
  }
}
