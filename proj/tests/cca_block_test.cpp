// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/cca_block.hpp"
#include "cca/grad_check.hpp"
#include "cca/harness/gradcheck_suite.hpp"
#include "cca/params.hpp"
#include "oracle/naive.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cca;
using cca::test::draw;
using cca::test::random_matrix;
using cca::test::random_tensor;

namespace {

CcaConfig small_config(std::size_t c_in = 4, std::size_t stride = 2) {
  CcaConfig c;
  c.c_in = c_in;
  c.c_mid = 4;
  c.c_out = 4;
  c.heads = 2;
  c.stride = stride;
  return c;
}

KeyFeatureSet<double> random_keys(std::size_t n, std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  KeyFeatureSet<double> k;
  for (std::size_t i = 0; i < n; ++i) {
    k.positions.push_back({std::size_t(rng.index(w)), std::size_t(rng.index(h))});
    k.raw_scores.push_back(rng.uniform());
  }
  k.features = random_matrix<double>(Eigen::Index(n), Eigen::Index(c), rng);
  return k;
}

}  // namespace

TEST_CASE("tokens: layout of a 2x2 map with four keys") {
  Rng rng(1);
  const auto f = random_tensor<double>({1, 8, 2, 2}, rng);
  const auto keys = random_keys(4, 8, 2, 2, rng);
  const auto a = assemble_tokens(f, 0, keys);
  CHECK(a.tokens.rows() == 8);
  CHECK(a.layout.token_count() == 8);
  for (std::size_t p = 0; p < 4; ++p)
    for (std::size_t c = 0; c < 8; ++c) CHECK(a.tokens(Eigen::Index(p), Eigen::Index(c)) == f(0, c, p / 2, p % 2));
  CHECK(a.tokens.bottomRows(4) == keys.features);
}

TEST_CASE("tokens: no keys, and the round trip") {
  Rng rng(2);
  const auto f = random_tensor<double>({1, 3, 4, 5}, rng);
  const auto a = assemble_tokens(f, 0, KeyFeatureSet<double>{});
  CHECK(a.tokens.rows() == 20);
  CHECK(reassemble_spatial(a.tokens, a.layout) == f);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r(seed);
    const std::size_t c = draw(r, 1, 5), h = draw(r, 1, 6), w = draw(r, 1, 6), n = draw(r, 0, 4);
    const auto x = random_tensor<double>({2, c, h, w}, r);
    const auto keys = random_keys(n, c, h, w, r);
    const std::size_t b = std::size_t(r.index(2));
    const auto assembled = assemble_tokens(x, b, keys);
    const auto [map, feats] = disassemble_tokens(assembled.tokens, assembled.layout);
    for (std::size_t i = 0; i < c * h * w; ++i) CHECK(map.data()[i] == x.data()[b * c * h * w + i]);
    CHECK(feats == keys.features);
  }
}

TEST_CASE("reassemble_spatial: scatter-add cases") {
  Rng rng(3);
  TokenLayout layout{3, 3, {{1, 1}}};
  TokenMatrix<double> tokens = TokenMatrix<double>::Zero(10, 2);
  tokens(9, 0) = 2.5;
  tokens(9, 1) = -1.0;
  const auto m = reassemble_spatial(tokens, layout);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 9; ++p) CHECK(m(0, c, p / 3, p % 3) == (p == 4 ? tokens(9, Eigen::Index(c)) : 0.0));

  tokens = random_matrix<double>(10, 2, rng);
  tokens.row(9).setZero();
  const auto local_only = reassemble_spatial(tokens, layout);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t p = 0; p < 9; ++p) CHECK(local_only(0, c, p / 3, p % 3) == tokens(Eigen::Index(p), Eigen::Index(c)));

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng r(seed);
    const std::size_t c = draw(r, 1, 4), h = draw(r, 1, 5), w = draw(r, 1, 5), n = draw(r, 0, 5);
    TokenLayout l{h, w, random_keys(n, c, h, w, r).positions};
    const TokenMatrix<double> t = random_matrix<double>(Eigen::Index(h * w + n), Eigen::Index(c), r);
    Tensor<double> expected({1, c, h, w}), overwritten({1, c, h, w});
    for (std::size_t p = 0; p < h * w; ++p)
      for (std::size_t ch = 0; ch < c; ++ch)
        expected(0, ch, p / w, p % w) = overwritten(0, ch, p / w, p % w) = t(Eigen::Index(p), Eigen::Index(ch));
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t ch = 0; ch < c; ++ch) {
        expected(0, ch, l.keys[k].y, l.keys[k].x) += t(Eigen::Index(h * w + k), Eigen::Index(ch));
        overwritten(0, ch, l.keys[k].y, l.keys[k].x) = t(Eigen::Index(h * w + k), Eigen::Index(ch));
      }
    CHECK(reassemble_spatial(t, l, ScatterMode::add) == expected);
    CHECK(reassemble_spatial(t, l, ScatterMode::overwrite) == overwritten);
  }
}

TEST_CASE("cca_forward: documented output shapes") {
  CcaConfig c;  // c_in 16, c_mid 8, c_out 16, s 2
  const Tensor<float> x({1, 16, 32, 32});
  CHECK(cca_forward(x, make_cca_params<float>(c, 1)).shape() == Shape{1, 16, 16, 16});
  c.stride = 1;
  CHECK(cca_forward(x, make_cca_params<float>(c, 1)).shape() == Shape{1, 16, 32, 32});

  for (std::size_t s : {1, 2})
    for (std::size_t h : {8, 16, 32})
      for (std::size_t w : {8, 16, 32}) {
        auto cfg = small_config(3, s);
        const auto y = cca_forward(Tensor<float>({2, 3, h, w}, 0.5f), make_cca_params<float>(cfg, 7));
        CHECK(y.shape() == Shape{2, 4, (h - 1) / s + 1, (w - 1) / s + 1});
        CHECK(y.shape().h == cfg.reduced_extent(h));
      }
}

TEST_CASE("cca_forward: 64-bit forward equals the composed stage oracles") {
  CcaConfig c;
  c.c_in = 8;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    c.stride = seed % 2 == 0 ? 2 : 1;
    const auto p = make_cca_params<double>(c, seed);
    const auto x = random_tensor<double>({1, 8, 16, 16}, rng);
    CHECK(test::same_values(cca_forward(x, p).data(), oracle::cca_forward(x, p).data()));
  }
}

TEST_CASE("cca_forward: deterministic, batch independent") {
  const auto cfg = small_config();
  const auto p = make_cca_params<double>(cfg, 3);
  Rng rng(3);
  const auto x = random_tensor<double>({2, 4, 8, 8}, rng);
  const auto y = cca_forward(x, p);
  CHECK(y == cca_forward(x, p));
  CHECK(make_cca_params<double>(cfg, 3).conv1.weights == p.conv1.weights);
  Tensor<double> second({1, 4, 8, 8});
  std::copy(x.data().begin() + 256, x.data().end(), second.data().begin());
  const auto y2 = cca_forward(second, p);
  for (std::size_t i = 0; i < y2.size(); ++i) CHECK(y2.data()[i] == y.data()[y2.size() + i]);
}

TEST_CASE("cca_forward: zeroed weights leave the conv3 bias") {
  auto p = make_cca_params<double>(CcaConfig{}, 5);
  zero_weights(p);
  Rng rng(5);
  const auto y = cca_forward(random_tensor<double>({1, 16, 12, 12}, rng), p);
  for (std::size_t o = 0; o < 16; ++o)
    for (std::size_t i = 0; i < 36; ++i) CHECK(y(0, o, i / 6, i % 6) == p.conv3.bias(Eigen::Index(o)));
}

TEST_CASE("cca_forward: degenerate key count") {
  auto cfg = small_config();
  cfg.n_keys = 0;
  const auto p = make_cca_params<double>(cfg, 2);
  Rng rng(2);
  const auto x = random_tensor<double>({1, 4, 6, 6}, rng);
  const auto t = cca_forward_traced(x, p);
  CHECK(t.tokens[0].rows() == 9);
  CHECK(t.output.shape() == Shape{1, 4, 3, 3});
}

TEST_CASE("cca_forward: gradient on a 1x4x8x8 instance") {
  for (ScatterMode mode : {ScatterMode::add, ScatterMode::overwrite}) {
    auto cfg = small_config();
    cfg.scatter = mode;
    Rng rng(11);
    CcaParams<double> p;
    Tensor<double> x;
    CcaTrace<double> trace;
    do {
      p = make_cca_params<double>(cfg, rng.index(1000000));
      x = random_tensor<double>({1, 4, 8, 8}, rng);
      trace = cca_forward_traced(x, p);
    } while (harness::argmax_margin(trace.gcfc.scores) < 1e-2);
    const auto r = random_tensor<double>(trace.output.shape(), rng);
    auto g = cca_backward(x, p, trace, r);
    std::vector<GradTarget> targets{{"input", x.data(), g.input.data()}};
    auto values = parameter_spans<double>(p);
    auto analytic = parameter_spans<double>(g.params);
    for (std::size_t i = 0; i < values.size(); ++i)
      targets.push_back({values[i].name, values[i].values, analytic[i].values});
    const auto loss = [&] {
      const auto y = cca_forward(x, p);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += r.data()[i] * y.data()[i];
      return s;
    };
    const auto report = grad_check(loss, targets, 1e-5);
    CHECK(report.passed());
    for (const auto& e : report.entries) CHECK(e.count > 0);
  }
}

TEST_CASE("cca_forward: errors name the failing stage") {
  const auto p = make_cca_params<float>(small_config(), 1);
  try {
    cca_forward(Tensor<float>({1, 5, 8, 8}), p);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).rfind("stage conv1:", 0) == 0);
  }
  CcaConfig bad = small_config();
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = small_config();
  bad.stride = 3;
  CHECK_THROWS_AS(make_cca_params<float>(bad, 1), std::invalid_argument);
}

TEST_CASE("accounting: closed forms") {
  Rng rng(1);
  CHECK(make_conv<float>({64, 3, 1, 1, 0, 1, true}, rng).param_count() == 195);
  CHECK(lcfe_param_count(64) == 111447);
  const auto cfg = CcaConfig{};
  const auto p16 = flop_count(cfg, {1, 16, 16, 16});
  const auto p32 = flop_count(cfg, {1, 16, 32, 32});
  for (std::size_t i = 0; i < p16.stages.size(); ++i) {
    if (p16.stages[i].stage == "encoder") continue;  // attention grows with T^2
    CHECK(p32.stages[i].count == 4 * p16.stages[i].count);
  }
  CHECK(param_count(cfg).total() == enumerate_parameters<float>(make_cca_params<float>(cfg, 0)));
}

TEST_CASE("accounting: param_count equals container enumeration") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    CcaConfig c;
    c.heads = draw(rng, 1, 4);
    c.c_mid = c.heads * draw(rng, 1, 4);
    c.c_in = draw(rng, 1, 12);
    c.c_out = draw(rng, 1, 12);
    c.n_keys = draw(rng, 0, 6);
    c.layers = draw(rng, 1, 3);
    c.ffn_hidden = rng.index(2) == 0 ? 0 : draw(rng, 1, 20);
    c.bias = rng.index(2) == 0;
    c.stride = draw(rng, 1, 2);
    const auto table = param_count(c);
    CHECK(table.total() == enumerate_parameters<double>(make_cca_params<double>(c, seed)));
    // stage subtotals match the named container entries
    const auto p = make_cca_params<double>(c, seed);
    std::uint64_t encoder = 0, lcfe = 0;
    p.visit([&](const std::string& name, std::span<const double> v) {
      if (name.rfind("encoder.", 0) == 0) encoder += v.size();
      if (name.rfind("lcfe.", 0) == 0) lcfe += v.size();
    });
    for (const auto& s : table.stages) {
      if (s.stage == "encoder") CHECK(s.count == encoder);
    }
    CHECK(lcfe == lcfe_param_count(c.c_mid, c.bias));
  }
}
