// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "cca/cca_block.hpp"
#include "cca/det_metrics.hpp"
#include "cca/linalg.hpp"
#include "cca/harness/demo_train.hpp"
#include "cca/harness/gradcheck_suite.hpp"
#include "cca/params.hpp"
#include "oracle/naive.hpp"
#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <sstream>

using namespace cca;
using test::draw;
using test::max_rel_error;
using test::random_matrix;
using test::random_tensor;
using test::same_values;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects failures without stopping, so the detail names the first one.
class Tally {
 public:
  void check(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_++ == 0) first_ = what;
  }
  Outcome outcome(std::string summary) const {
    if (failures_ == 0) return {true, summary + ", " + std::to_string(checks_) + " checks"};
    return {false, std::to_string(failures_) + "/" + std::to_string(checks_) + " checks failed, first: " + first_};
  }

 private:
  std::size_t checks_ = 0, failures_ = 0;
  std::string first_;
};

std::string str(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

template <typename Scalar>
ConvSpec<Scalar> random_conv(Rng& rng, std::size_t c_in) {
  const std::size_t k = rng.index(3) == 0 ? 1 : 3;
  const std::size_t d = draw(rng, 1, 3);
  return make_conv<Scalar>({c_in, draw(rng, 1, 4), k, draw(rng, 1, 2), draw(rng, 0, d * (k / 2)), d,
                            rng.index(2) == 0},
                           rng);
}

Tensor<double> quantized(const Shape& s, Rng& rng) {
  auto t = random_tensor<double>(s, rng);
  for (auto& v : t.data()) v = std::round(v * 2.0);
  return t;
}

EncoderParams<double> perturbed_encoder(Rng& rng, std::size_t width, std::size_t heads, std::size_t layers) {
  auto p = make_encoder_params<double>({width, heads, 0, layers}, rng);
  const auto w = Eigen::Index(width);
  for (auto& l : p.layers) {
    l.ln1_gamma = Vector<double>::Ones(w) + 0.2 * test::random_vector<double>(w, rng);
    l.ln1_beta = 0.2 * test::random_vector<double>(w, rng);
    l.ln2_gamma = Vector<double>::Ones(w) + 0.2 * test::random_vector<double>(w, rng);
    l.ln2_beta = 0.2 * test::random_vector<double>(w, rng);
  }
  return p;
}

Outcome oracle_equivalence() {
  Tally t;
  constexpr std::uint64_t kCases = 100;
  for (std::uint64_t seed = 0; seed < kCases; ++seed) {
    const std::string tag = " seed " + std::to_string(seed);
    Rng rng(seed);
    const std::size_t c = draw(rng, 1, 4);
    const Shape s{draw(rng, 1, 2), c, draw(rng, 7, 12), draw(rng, 7, 12)};

    const auto x = random_tensor<double>(s, rng);
    const auto conv = random_conv<double>(rng, c);
    t.check(same_values(conv2d(x, conv).data(), oracle::conv2d(x, conv).data()), "conv2d f64" + tag);
    t.check(same_values(softmax_channels(x).data(), oracle::softmax_channels(x).data()), "softmax f64" + tag);
    t.check(same_values(sigmoid(x).data(), oracle::sigmoid(x).data()), "sigmoid f64" + tag);
    const auto q = quantized(s, rng);
    const auto pooled = global_max_pool_argmax(q);
    const auto want = oracle::argmax_positions(q);
    t.check(pooled.positions == want, "max pool positions" + tag);
    for (std::size_t i = 0; i < want.size(); ++i)
      t.check(pooled.scores[i] == q(i / c, i % c, want[i].y, want[i].x), "max pool score" + tag);

    const auto m = Eigen::Index(draw(rng, 1, 9)), k = Eigen::Index(draw(rng, 1, 9)), n = Eigen::Index(draw(rng, 1, 9));
    const Matrix<double> a = random_matrix<double>(m, k, rng), b = random_matrix<double>(k, n, rng);
    t.check(Matrix<double>(matmul(a, b)) == oracle::matmul(a, b), "matmul f64" + tag);
    const Vector<double> g = test::random_vector<double>(k, rng), be = test::random_vector<double>(k, rng);
    t.check(Matrix<double>(layer_norm<double>(a, g, be, 1e-5)) == oracle::layer_norm<double>(a, g, be, 1e-5),
            "layer_norm f64" + tag);
    const std::size_t heads = draw(rng, 1, 4);
    const auto enc = perturbed_encoder(rng, heads * draw(rng, 1, 4), heads, 1);
    const Matrix<double> tokens = random_matrix<double>(m, Eigen::Index(enc.width()), rng, -2, 2);
    t.check(Matrix<double>(multi_head_attention(tokens, enc.layers[0], heads)) ==
                oracle::attention(tokens, enc.layers[0], heads),
            "attention f64" + tag);

    // same draws in 32-bit against the 32-bit oracle
    Rng r32(seed);
    const std::size_t c32 = draw(r32, 1, 4);
    const Shape s32{draw(r32, 1, 2), c32, draw(r32, 7, 12), draw(r32, 7, 12)};
    const auto xf = random_tensor<float>(s32, r32);
    const auto convf = random_conv<float>(r32, c32);
    t.check(max_rel_error(conv2d(xf, convf), oracle::conv2d(xf, convf)) <= 1e-5, "conv2d f32" + tag);
    t.check(max_rel_error(softmax_channels(xf), oracle::softmax_channels(xf)) <= 1e-5, "softmax f32" + tag);
    t.check(max_rel_error(sigmoid(xf), oracle::sigmoid(xf)) <= 1e-5, "sigmoid f32" + tag);
    t.check(global_max_pool_argmax(xf).positions == oracle::argmax_positions(xf), "max pool f32" + tag);
    const Matrix<float> af = random_matrix<float>(m, k, r32), bf = random_matrix<float>(k, n, r32);
    t.check(max_rel_error(Matrix<float>(matmul(af, bf)), oracle::matmul(af, bf)) <= 1e-5, "matmul f32" + tag);
    const Vector<float> gf = test::random_vector<float>(k, r32), bef = test::random_vector<float>(k, r32);
    t.check(max_rel_error(Matrix<float>(layer_norm<float>(af, gf, bef, 1e-5f)),
                          oracle::layer_norm<float>(af, gf, bef, 1e-5f)) <= 1e-5,
            "layer_norm f32" + tag);
    const auto encf = make_encoder_params<float>({8, 2}, r32);
    const Matrix<float> tf = random_matrix<float>(m, 8, r32);
    t.check(max_rel_error(Matrix<float>(multi_head_attention(tf, encf.layers[0], 2)),
                          oracle::attention(tf, encf.layers[0], 2)) <= 1e-5,
            "attention f32" + tag);
  }
  return t.outcome("7 kernels x 100 cases, f64 exact, f32 <= 1e-5");
}

Outcome gradient_suite() {
  CcaConfig config;
  config.c_in = 4;
  const auto result = harness::run_gradcheck_suite(config, 0, 1e-5);
  Tally t;
  double worst = 0;
  for (const auto& s : result.stages) {
    t.check(s.report.passed(), s.stage + " error " + str(s.report.max_rel_error()));
    worst = std::max(worst, s.report.max_rel_error());
  }
  for (const auto& m : result.missing) t.check(false, "stage " + m + " missing");
  return t.outcome(std::to_string(result.stages.size()) + " stages incl. cca_forward on 1x4x8x8, worst " +
                   str(worst));
}

Outcome shape_contract() {
  Tally t;
  for (std::size_t s : {1, 2}) {
    CcaConfig config;
    config.stride = s;
    const auto p = make_cca_params<float>(config, 1);
    for (std::size_t h : {8, 16, 32})
      for (std::size_t w : {8, 16, 32}) {
        Rng rng(h * 100 + w);
        const auto y = cca_forward(random_tensor<float>({1, config.c_in, h, w}, rng), p);
        const Shape want{1, config.c_out, (h + 2 - 3) / s + 1, (w + 2 - 3) / s + 1};
        t.check(y.shape() == want, to_string(y.shape()) + " for " + std::to_string(h) + "x" +
                                       std::to_string(w) + " s=" + std::to_string(s));
      }
  }
  return t.outcome("18 grid cases");
}

Outcome lcfe_convexity() {
  Tally t;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t c = draw(rng, 1, 8);
    const auto p = make_lcfe_params<double>({c}, rng);
    const auto f1 = random_tensor<double>({1, c, draw(rng, 2, 12), draw(rng, 2, 12)}, rng, -4, 4);
    const auto tr = lcfe_forward_traced(f1, p);
    const Shape s = f1.shape();
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        const double sum = tr.weights(0, 0, y, x) + tr.weights(0, 1, y, x) + tr.weights(0, 2, y, x);
        t.check(std::abs(sum - 1.0) <= 1e-6, "weight sum " + str(sum));
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double a = tr.branches[0](0, ch, y, x), b = tr.branches[1](0, ch, y, x),
                       d = tr.branches[2](0, ch, y, x), v = tr.output(0, ch, y, x);
          t.check(v >= std::min({a, b, d}) - 1e-12 && v <= std::max({a, b, d}) + 1e-12, "hull");
        }
      }
  }
  return t.outcome("100 random inputs");
}

Outcome gcfc_correctness() {
  Tally t;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const Shape s{1, draw(rng, 1, 4), draw(rng, 1, 9), draw(rng, 1, 9)};
    Tensor<double> scores;
    switch (seed % 3) {
      case 0:
        scores = random_tensor<double>(s, rng);
        break;
      case 1:
        scores = quantized(s, rng);  // many ties
        break;
      default: {
        // planted equal maxima at several random cells
        scores = random_tensor<double>(s, rng, -1, 0);
        for (std::size_t c = 0; c < s.c; ++c)
          for (std::size_t i = 0, n = draw(rng, 1, 4); i < n; ++i)
            scores(0, c, rng.index(s.h), rng.index(s.w)) = 1.0;
      }
    }
    const auto pooled = global_max_pool_argmax(scores);
    t.check(pooled.positions == oracle::argmax_positions(scores), "positions, map " + std::to_string(seed));

    const auto f1 = random_tensor<double>({1, draw(rng, 1, 3), s.h, s.w}, rng);
    const std::vector<Matrix<double>> up{random_matrix<double>(Eigen::Index(s.c), Eigen::Index(f1.shape().c), rng)};
    const auto g = collect_keys_backward<double>(f1, scores, pooled, up);
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t y = 0; y < s.h; ++y)
        for (std::size_t x = 0; x < s.w; ++x)
          if (!(pooled.position(0, c) == Position{x, y}))
            t.check(g.scores(0, c, y, x) == 0.0, "off-argmax gradient, map " + std::to_string(seed));
  }
  return t.outcome("1000 maps, two thirds with ties");
}

Outcome transformer_properties() {
  Tally t;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const auto p = perturbed_encoder(rng, 8, 2, 2);
    const auto n = Eigen::Index(draw(rng, 2, 12));
    const Matrix<double> x = random_matrix<double>(n, 8, rng, -2, 2);
    std::vector<Eigen::Index> perm(std::size_t(n), 0);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);
    Matrix<double> px(n, 8);
    for (Eigen::Index i = 0; i < n; ++i) px.row(i) = x.row(perm[std::size_t(i)]);
    const Matrix<double> y = encoder_forward(x, p), py = encoder_forward(px, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = (py.row(i) - y.row(perm[std::size_t(i)])).cwiseAbs().maxCoeff();
      worst = std::max(worst, e);
      t.check(e <= 1e-6, "equivariance " + str(e));
    }
    for (const auto& probs : multi_head_attention_traced(x, p.layers[0], 2).probs)
      for (Eigen::Index r = 0; r < probs.rows(); ++r)
        t.check(std::abs(probs.row(r).sum() - 1.0) <= 1e-6 && (probs.row(r).array() >= 0).all(), "row sum");

    auto zero = p;
    zero.visit([](const std::string&, std::span<double> v) { std::fill(v.begin(), v.end(), 0.0); });
    t.check(Matrix<double>(encoder_forward(x, zero)) == x, "zero block is not the identity");
  }
  return t.outcome("100 seeds, worst equivariance error " + str(worst));
}

Outcome metrics_checks() {
  using namespace metrics;
  Tally t;
  const std::vector<bool> labels{true, false, true, false, true};
  std::vector<double> conf{0.9, 0.8, 0.7, 0.6, 0.5};
  const double ap = average_precision(pr_curve(labels, conf, 3));
  t.check(std::abs(ap - 34.0 / 45.0) <= 1e-9, "hand-enumerated AP " + str(ap));

  const Box a{0, 0, 2, 2};
  t.check(iou(a, a) == 1.0, "identical boxes");
  t.check(iou(a, {3, 3, 4, 4}) == 0.0, "disjoint boxes");
  t.check(iou(a, {1, 1, 3, 3}) == 1.0 / 7.0, "1/7 case");

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<GroundTruthBox> gts;
    std::vector<DetectionBox> dets;
    for (std::size_t i = 0, n = draw(rng, 1, 12); i < n; ++i) {
      const double x = rng.uniform(0, 20), y = rng.uniform(0, 20);
      gts.push_back({int(rng.index(3)), {x, y, x + rng.uniform(1, 5), y + rng.uniform(1, 5)}});
    }
    for (std::size_t i = 0, n = rng.index(30); i < n; ++i) {
      const auto& g = gts[rng.index(gts.size())];
      const double j = rng.uniform(0, 1.2);
      Box b{g.box.x_min + rng.uniform(-j, j), g.box.y_min + rng.uniform(-j, j), g.box.x_max + rng.uniform(-j, j),
            g.box.y_max + rng.uniform(-j, j)};
      if (!b.valid()) b = g.box;
      dets.push_back({rng.index(5) == 0 ? int(rng.index(3)) : g.class_id, std::round(rng.uniform() * 10) / 10, b});
    }
    const double at50 = map_at(dets, gts, 0.5), range = map_range(dets, gts);
    t.check(at50 >= range - 1e-12, "mAP@.5 " + str(at50) + " < mAP@.5:.95 " + str(range) + ", set " +
                                       std::to_string(seed));
  }
  return t.outcome("AP 34/45 = " + str(ap) + ", 100 random sets");
}

Outcome accounting() {
  Tally t;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CcaConfig c;
    c.heads = draw(rng, 1, 4);
    c.c_mid = c.heads * draw(rng, 1, 6);
    c.c_in = draw(rng, 1, 32);
    c.c_out = draw(rng, 1, 32);
    c.n_keys = draw(rng, 0, 8);
    c.layers = draw(rng, 1, 3);
    c.ffn_hidden = rng.index(2) == 0 ? 0 : draw(rng, 1, 64);
    c.bias = rng.index(4) != 0;
    c.stride = draw(rng, 1, 2);
    const auto counted = param_count(c).total();
    const auto enumerated = enumerate_parameters<float>(make_cca_params<float>(c, seed));
    t.check(counted == enumerated, "config " + std::to_string(seed) + ": " + std::to_string(counted) +
                                       " vs " + std::to_string(enumerated));
  }
  constexpr std::uint64_t kExpression = 3 * (64 * 64 * 9 + 64) + (192 * 3 + 3) + (3 * 3 * 9 + 3);
  constexpr std::uint64_t kStated = 111609;
  Rng rng(0);
  const auto lcfe = enumerate_parameters<float>(make_lcfe_params<float>({64}, rng));
  t.check(lcfe_param_count(64) == kExpression && lcfe == kExpression,
          "LCFE closed form " + std::to_string(lcfe_param_count(64)) + ", enumerated " + std::to_string(lcfe));
  t.check(lcfe == kStated, "LCFE at c_mid=64 enumerates to " + std::to_string(lcfe) +
                               " (= the closed-form sum); stated total " + std::to_string(kStated) +
                               " differs by " + std::to_string(kStated - lcfe));
  return t.outcome("20 configs, LCFE(64) = " + std::to_string(lcfe));
}

Outcome demo() {
  harness::RunConfig rc;
  std::size_t good = 0, decreasing = 0;
  std::string shares;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = harness::demo_train(rc, seed);
    const double share = r.keys_near_patches(rc.demo.key_radius);
    good += share >= 0.5;
    decreasing += r.final_loss() < r.initial_loss();
    shares += (seed ? " " : "") + str(share);
  }
  Outcome o;
  o.pass = good >= 7 && decreasing == 10;
  o.detail = std::to_string(good) + "/10 runs with half the keys near patches, loss decreased in " +
             std::to_string(decreasing) + "/10 (shares " + shares + ")";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    double limit_s;  // 0: no runtime bound
  };
  const std::vector<Criterion> criteria{
      {1, "oracle equivalence", oracle_equivalence, 60},
      {2, "gradient suite", gradient_suite, 120},
      {3, "shape contract", shape_contract, 0},
      {4, "lcfe convexity", lcfe_convexity, 0},
      {5, "gcfc correctness", gcfc_correctness, 0},
      {6, "transformer properties", transformer_properties, 0},
      {7, "detection metrics", metrics_checks, 0},
      {8, "accounting", accounting, 0},
      {9, "demo training", demo, 600},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.limit_s > 0 && secs >= c.limit_s) {
      o.pass = false;
      o.detail += "; over the " + str(c.limit_s) + " s limit";
    }
    failed += !o.pass;
    std::printf("criterion %d %-24s %s  %.2f s  %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
