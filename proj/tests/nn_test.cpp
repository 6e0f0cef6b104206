// Copyright 2026 The codematch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "codematch/nn/adam.hpp"
#include "codematch/nn/grad_check.hpp"
#include "codematch/nn/graph.hpp"
#include "codematch/nn/skipgram.hpp"

namespace codematch::nn {
namespace {

using G = Graph<double>;
using T = Tensor<double>;

T random_tensor(Rng& rng, int r, int c, double lo = -1, double hi = 1) {
  T t(r, c);
  fill_uniform(t, rng, lo, hi);
  return t;
}

// Store with named random tensors.
ParamStore<double> store(Rng& rng, std::vector<std::pair<std::string, std::pair<int, int>>> shapes) {
  ParamStore<double> s;
  for (auto& [name, shape] : shapes) s.add(name, shape.first, shape.second) = random_tensor(rng, shape.first, shape.second);
  return s;
}

// Reduces an op output to a scalar through fixed random weights.
Var project(G& g, Var x, std::uint64_t seed) {
  Rng rng(seed);
  const auto& v = g.value(x);
  return g.weighted_sum(x, random_tensor(rng, v.rows, v.cols));
}

constexpr double kTol = 1e-4;

void expect_grads(ParamStore<double>& p, const std::function<Var(G&)>& f, bool allow_excluded = false) {
  const auto r = grad_check(p, f);
  EXPECT_GT(r.checked, 0u);
  EXPECT_LT(r.max_rel_error, kTol) << "worst at " << r.worst;
  if (!allow_excluded) {
    EXPECT_EQ(r.excluded, 0u);
  }
}

LstmWeights lstm_weights(G& g, const std::string& prefix) {
  return {g.param(prefix + "w_ih"), g.param(prefix + "w_hh"), g.param(prefix + "b")};
}

TEST(GradCheck, SquareAtThree) {
  ParamStore<double> p;
  p.add("x", 1, 1).data[0] = 3.0;
  const auto r = grad_check(p, [](G& g) {
    const Var x = g.param("x");
    return g.linear(x, x, g.constant(T::scalar(0.0)));
  });
  EXPECT_EQ(r.checked, 1u);
  EXPECT_LT(r.max_rel_error, 1e-8);
  ParamStore<double> grads = p.zeros_like();
  G g(p, &grads);
  const Var x = g.param("x");
  const Var y = g.linear(x, x, g.constant(T::scalar(0.0)));
  EXPECT_DOUBLE_EQ(g.value(y).item(), 9.0);
  g.backward(y);
  EXPECT_DOUBLE_EQ(grads.at("x").item(), 6.0);
}

TEST(GradCheck, MaxpoolTieIsExcluded) {
  ParamStore<double> p;
  p.add("x", 2, 2) = T::from(2, 2, {1, 3, 1, 0});
  const auto r = grad_check(p, [](G& g) { return g.weighted_sum(g.maxpool_rows(g.param("x")), T::row({1.0, 1.0})); });
  EXPECT_GT(r.excluded, 0u);
  EXPECT_LT(r.max_rel_error, kTol);
}

TEST(Embed, GathersRowsAndScattersCounts) {
  ParamStore<double> p;
  p.add("table", 3, 2) = T::from(3, 2, {1, 0, 0, 1, 5, 5});
  ParamStore<double> grads = p.zeros_like();
  G g(p, &grads);
  const std::vector<int> ids = {0, 0, 2};
  const Var e = g.embed(g.param("table"), ids);
  EXPECT_EQ(g.value(e), T::from(3, 2, {1, 0, 1, 0, 5, 5}));
  g.backward(g.weighted_sum(e, T(3, 2, 1.0)));
  EXPECT_EQ(grads.at("table"), T::from(3, 2, {2, 2, 0, 0, 1, 1}));
}

TEST(Embed, RejectsOutOfRangeIds) {
  ParamStore<double> p;
  p.add("table", 3, 2);
  G g(p, nullptr);
  const std::vector<int> ids = {3};
  EXPECT_THROW(g.embed(g.param("table"), ids), ShapeError);
}

TEST(Embed, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  auto p = store(rng, {{"table", {5, 3}}});
  expect_grads(p, [](G& g) {
    const std::vector<int> ids = {4, 1, 1, 0};
    return project(g, g.embed(g.param("table"), ids), 7);
  });
}

ParamStore<double> lstm_store(Rng& rng, int e, int h) {
  return store(rng, {{"x", {3, e}},
                     {"f.w_ih", {4 * h, e}},
                     {"f.w_hh", {4 * h, h}},
                     {"f.b", {1, 4 * h}},
                     {"b.w_ih", {4 * h, e}},
                     {"b.w_hh", {4 * h, h}},
                     {"b.b", {1, 4 * h}}});
}

TEST(BiLstm, ZeroWeightsGiveZeroOutputs) {
  Rng rng(2);
  auto p = lstm_store(rng, 2, 2);
  for (auto& [name, t] : p.all()) {
    if (name != "x") std::fill(t.data.begin(), t.data.end(), 0.0);
  }
  G g(p, nullptr);
  const auto out = g.bilstm(g.param("x"), lstm_weights(g, "f."), lstm_weights(g, "b."));
  for (double v : g.value(out.seq).data) EXPECT_EQ(v, 0.0);
}

TEST(BiLstm, SingleStepConcatenatesBothDirections) {
  Rng rng(3);
  auto p = lstm_store(rng, 2, 2);
  p.at("x") = random_tensor(rng, 1, 2);
  G g(p, nullptr);
  const auto out = g.bilstm(g.param("x"), lstm_weights(g, "f."), lstm_weights(g, "b."));
  const auto fwd = g.lstm(g.param("x"), lstm_weights(g, "f."), false);
  const auto bwd = g.lstm(g.param("x"), lstm_weights(g, "b."), false);
  const auto& seq = g.value(out.seq);
  ASSERT_EQ(seq.shape(), (std::vector<int>{1, 4}));
  EXPECT_EQ(seq(0, 0), g.value(fwd)(0, 0));
  EXPECT_EQ(seq(0, 1), g.value(fwd)(0, 1));
  EXPECT_EQ(seq(0, 2), g.value(bwd)(0, 0));
  EXPECT_EQ(seq(0, 3), g.value(bwd)(0, 1));
  EXPECT_EQ(g.value(out.fwd_final), g.value(fwd));
  EXPECT_EQ(g.value(out.bwd_final), g.value(bwd));
}

// Straight-line LSTM recurrence for one direction.
std::vector<std::vector<double>> naive_lstm(const T& x, const T& wih, const T& whh, const T& b, bool reverse) {
  const int len = x.rows, h = whh.cols;
  std::vector<std::vector<double>> out(len, std::vector<double>(h));
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  auto sig = [](double v) { return 1 / (1 + std::exp(-v)); };
  for (int s = 0; s < len; ++s) {
    const int t = reverse ? len - 1 - s : s;
    std::vector<double> a(4 * h);
    for (int r = 0; r < 4 * h; ++r) {
      a[r] = b(0, r);
      for (int e = 0; e < x.cols; ++e) a[r] += wih(r, e) * x(t, e);
      for (int k = 0; k < h; ++k) a[r] += whh(r, k) * hp[k];
    }
    for (int k = 0; k < h; ++k) {
      const double c = sig(a[h + k]) * cp[k] + sig(a[k]) * std::tanh(a[2 * h + k]);
      cp[k] = c;
      hp[k] = sig(a[3 * h + k]) * std::tanh(c);
      out[t][k] = hp[k];
    }
  }
  return out;
}

TEST(BiLstm, MatchesStraightLineRecurrence) {
  Rng rng(4);
  auto p = lstm_store(rng, 3, 2);
  G g(p, nullptr);
  const auto out = g.bilstm(g.param("x"), lstm_weights(g, "f."), lstm_weights(g, "b."));
  const auto f = naive_lstm(p.at("x"), p.at("f.w_ih"), p.at("f.w_hh"), p.at("f.b"), false);
  const auto b = naive_lstm(p.at("x"), p.at("b.w_ih"), p.at("b.w_hh"), p.at("b.b"), true);
  const auto& seq = g.value(out.seq);
  for (int t = 0; t < 3; ++t) {
    for (int k = 0; k < 2; ++k) {
      EXPECT_NEAR(seq(t, k), f[t][k], 1e-12);
      EXPECT_NEAR(seq(t, 2 + k), b[t][k], 1e-12);
    }
  }
  EXPECT_NEAR(g.value(out.fwd_final)(0, 1), f[2][1], 1e-12);
  EXPECT_NEAR(g.value(out.bwd_final)(0, 1), b[0][1], 1e-12);
}

TEST(BiLstm, RejectsEmptySequence) {
  Rng rng(5);
  auto p = lstm_store(rng, 2, 2);
  p.at("x") = T(0, 2);
  G g(p, nullptr);
  EXPECT_THROW(g.bilstm(g.param("x"), lstm_weights(g, "f."), lstm_weights(g, "b.")), ShapeError);
}

TEST(BiLstm, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  auto p = lstm_store(rng, 2, 2);
  expect_grads(p, [](G& g) {
    const auto out = g.bilstm(g.param("x"), lstm_weights(g, "f."), lstm_weights(g, "b."));
    return g.add_scalars({project(g, out.seq, 1), project(g, out.fwd_final, 2), project(g, out.bwd_final, 3)});
  });
}

TEST(Maxpool, PerColumnMaximum) {
  ParamStore<double> p;
  p.add("x", 2, 2) = T::from(2, 2, {1, 3, 2, 0});
  G g(p, nullptr);
  EXPECT_EQ(g.value(g.maxpool_rows(g.param("x"))), T::row({2, 3}));
  p.at("x") = T::row({4, -1});
  G g1(p, nullptr);
  EXPECT_EQ(g1.value(g1.maxpool_rows(g1.param("x"))), T::row({4, -1}));
  p.at("x") = T(0, 2);
  G g2(p, nullptr);
  EXPECT_THROW(g2.maxpool_rows(g2.param("x")), ShapeError);
}

TEST(Maxpool, FirstArgmaxTakesTheGradient) {
  ParamStore<double> p;
  p.add("x", 2, 1) = T::from(2, 1, {1, 1});
  ParamStore<double> grads = p.zeros_like();
  G g(p, &grads);
  g.backward(g.weighted_sum(g.maxpool_rows(g.param("x")), T::scalar(1.0)));
  EXPECT_EQ(grads.at("x"), T::from(2, 1, {1, 0}));
}

TEST(Maxpool, GradientMatchesFiniteDifferencesAwayFromTies) {
  Rng rng(7);
  auto p = store(rng, {{"x", {4, 3}}});
  expect_grads(p, [](G& g) { return project(g, g.maxpool_rows(g.param("x")), 4); });
}

TEST(Cosine, Examples) {
  ParamStore<double> p;
  p.add("a", 1, 2) = T::row({1, 0});
  p.add("b", 1, 2) = T::row({0, 1});
  p.add("v", 1, 3) = T::row({0.3, -2, 5});
  G g(p, nullptr);
  EXPECT_DOUBLE_EQ(g.value(g.cosine(g.param("a"), g.param("b"))).item(), 0.0);
  EXPECT_NEAR(g.value(g.cosine(g.param("v"), g.param("v"))).item(), 1.0, 1e-15);
  EXPECT_THROW(g.cosine(g.param("a"), g.param("v")), ShapeError);
}

TEST(Cosine, ZeroNormStrictThrowsGuardedStaysFinite) {
  ParamStore<double> p;
  p.add("z", 1, 2);
  p.add("a", 1, 2) = T::row({1, 2});
  {
    G g(p, nullptr, NormGuard::kStrict);
    EXPECT_THROW(g.cosine(g.param("z"), g.param("a")), ShapeError);
    EXPECT_THROW(g.l2sim(g.param("a"), g.param("z")), ShapeError);
  }
  ParamStore<double> grads = p.zeros_like();
  G g(p, &grads, NormGuard::kEpsilon);
  const Var c = g.cosine(g.param("z"), g.param("a"));
  EXPECT_EQ(g.value(c).item(), 0.0);
  g.backward(g.add_scalars({c, g.l2sim(g.param("a"), g.param("z"))}));
  EXPECT_TRUE(grads.at("z").all_finite());
  EXPECT_TRUE(grads.at("a").all_finite());
}

TEST(Cosine, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  auto p = store(rng, {{"a", {1, 5}}, {"b", {1, 5}}});
  expect_grads(p, [](G& g) { return g.cosine(g.param("a"), g.param("b")); });
}

TEST(L2Sim, Examples) {
  ParamStore<double> p;
  p.add("a", 1, 2) = T::row({3, 0});
  p.add("b", 1, 2) = T::row({0, 0.5});
  p.add("c", 1, 2) = T::row({-1, 0});
  G g(p, nullptr);
  EXPECT_NEAR(g.value(g.l2sim(g.param("a"), g.param("a"))).item(), 1.0, 1e-15);
  EXPECT_NEAR(g.value(g.l2sim(g.param("a"), g.param("b"))).item(), -1.0, 1e-15);
  EXPECT_NEAR(g.value(g.l2sim(g.param("a"), g.param("c"))).item(), -3.0, 1e-15);
}

TEST(L2Sim, AffineInCosineOnRandomPairs) {
  Rng rng(9);
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = 1 + static_cast<int>(rng.below(16));
    ParamStore<double> p;
    p.add("a", 1, d) = random_tensor(rng, 1, d, -3, 3);
    p.add("b", 1, d) = random_tensor(rng, 1, d, -3, 3);
    G g(p, nullptr);
    const double s = g.value(g.l2sim(g.param("a"), g.param("b"))).item();
    const double c = g.value(g.cosine(g.param("a"), g.param("b"))).item();
    ASSERT_NEAR(s, 2 * c - 1, 1e-6);
    const double s_rev = g.value(g.l2sim(g.param("b"), g.param("a"))).item();
    ASSERT_EQ(s, s_rev);
  }
}

TEST(L2Sim, InducesTheSameRankingAsCosine) {
  Rng rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    ParamStore<double> p;
    p.add("q", 1, 6) = random_tensor(rng, 1, 6);
    for (int c = 0; c < 20; ++c) p.add("c" + std::to_string(c), 1, 6) = random_tensor(rng, 1, 6);
    G g(p, nullptr);
    std::vector<double> l2(20), cs(20);
    for (int c = 0; c < 20; ++c) {
      l2[c] = g.value(g.l2sim(g.param("q"), g.param("c" + std::to_string(c)))).item();
      cs[c] = g.value(g.cosine(g.param("q"), g.param("c" + std::to_string(c)))).item();
    }
    std::vector<int> o1(20), o2(20);
    std::iota(o1.begin(), o1.end(), 0);
    std::iota(o2.begin(), o2.end(), 0);
    std::stable_sort(o1.begin(), o1.end(), [&](int a, int b) { return l2[a] > l2[b]; });
    std::stable_sort(o2.begin(), o2.end(), [&](int a, int b) { return cs[a] > cs[b]; });
    EXPECT_EQ(o1, o2);
  }
}

TEST(L2Sim, ScaleInvariant) {
  Rng rng(11);
  ParamStore<double> p;
  p.add("a", 1, 4) = random_tensor(rng, 1, 4);
  p.add("b", 1, 4) = random_tensor(rng, 1, 4);
  G g(p, nullptr);
  const double s = g.value(g.l2sim(g.param("a"), g.param("b"))).item();
  for (double lambda : {0.01, 2.5, 1e3}) {
    ParamStore<double> q;
    q.add("a", 1, 4) = p.at("a");
    q.add("b", 1, 4) = p.at("b");
    for (auto& v : q.at("a").data) v *= lambda;
    for (auto& v : q.at("b").data) v *= lambda;
    G h(q, nullptr);
    EXPECT_NEAR(h.value(h.l2sim(h.param("a"), h.param("b"))).item(), s, 1e-12);
  }
}

TEST(L2Sim, GradientMatchesFiniteDifferences) {
  Rng rng(12);
  auto p = store(rng, {{"a", {1, 4}}, {"b", {1, 4}}});
  expect_grads(p, [](G& g) { return g.l2sim(g.param("a"), g.param("b")); });
}

TEST(Linear, IdentityIsPassThrough) {
  ParamStore<double> p;
  p.add("x", 2, 3) = T::from(2, 3, {1, 2, 3, 4, 5, 6});
  p.add("w", 3, 3) = T::from(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  p.add("b", 1, 3);
  G g(p, nullptr);
  EXPECT_EQ(g.value(g.linear(g.param("x"), g.param("w"), g.param("b"))), p.at("x"));
  p.at("w") = T(2, 2);
  G h(p, nullptr);
  EXPECT_THROW(h.linear(h.param("x"), h.param("w"), h.param("b")), ShapeError);
}

TEST(Linear, GradientMatchesFiniteDifferences) {
  Rng rng(13);
  auto p = store(rng, {{"x", {3, 4}}, {"w", {2, 4}}, {"b", {1, 2}}});
  expect_grads(p, [](G& g) { return project(g, g.linear(g.param("x"), g.param("w"), g.param("b")), 5); });
}

TEST(Concat, PreservesOrder) {
  ParamStore<double> p;
  p.add("a", 1, 2) = T::row({1, 2});
  p.add("b", 1, 3) = T::row({3, 4, 5});
  G g(p, nullptr);
  EXPECT_EQ(g.value(g.concat_cols({g.param("a"), g.param("b")})), T::row({1, 2, 3, 4, 5}));
  EXPECT_THROW(g.concat_rows({g.param("a"), g.param("b")}), ShapeError);
}

TEST(Concat, GradientsMatchFiniteDifferences) {
  Rng rng(14);
  auto p = store(rng, {{"a", {2, 2}}, {"b", {2, 3}}, {"c", {1, 2}}});
  expect_grads(p, [](G& g) {
    const Var cols = g.concat_cols({g.param("a"), g.param("b")});
    const Var rows = g.concat_rows({g.param("a"), g.param("c"), g.param("a")});
    return g.add_scalars({project(g, cols, 1), project(g, rows, 2)});
  });
}

TEST(Slicing, GradientsMatchFiniteDifferences) {
  Rng rng(15);
  auto p = store(rng, {{"x", {4, 3}}, {"v", {1, 3}}});
  expect_grads(p, [](G& g) {
    const Var x = g.param("x");
    return g.add_scalars({project(g, g.slice_rows(x, 1, 2), 1), project(g, g.slice_cols(x, 2, 1), 2),
                          project(g, g.gather_rows(x, {3, 0, 3}), 3), project(g, g.repeat_row(g.param("v"), 3), 4)});
  });
}

TEST(CosineMatrix, EntriesArePairwiseCosinesAndGradientsMatch) {
  Rng rng(16);
  auto p = store(rng, {{"a", {3, 4}}, {"b", {2, 4}}});
  {
    G g(p, nullptr);
    const auto& m = g.value(g.cosine_matrix(g.param("a"), g.param("b")));
    ParamStore<double> q;
    q.add("x", 1, 4) = T::from_matrix(p.at("a").mat().row(2));
    q.add("y", 1, 4) = T::from_matrix(p.at("b").mat().row(1));
    G h(q, nullptr);
    EXPECT_NEAR(m(2, 1), h.value(h.cosine(h.param("x"), h.param("y"))).item(), 1e-14);
  }
  expect_grads(p, [](G& g) { return project(g, g.cosine_matrix(g.param("a"), g.param("b")), 6); });
}

TEST(AttentiveMean, DuplicateRowsGiveThatRow) {
  ParamStore<double> p;
  p.add("w", 1, 2) = T::row({0.3, 0.9});
  p.add("q", 2, 3) = T::from(2, 3, {1, 2, 3, 1, 2, 3});
  G g(p, nullptr);
  const auto& out = g.value(g.attentive_mean(g.param("w"), g.param("q")));
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(out(0, k), k + 1.0, 1e-9);  // 1e-12 denominator guard
}

TEST(AttentiveMean, GradientMatchesFiniteDifferences) {
  Rng rng(18);
  auto p = store(rng, {{"w", {2, 3}}, {"q", {3, 2}}});
  for (auto& v : p.at("w").data) v = std::abs(v) + 0.2;
  expect_grads(p, [](G& g) { return project(g, g.attentive_mean(g.param("w"), g.param("q")), 8); });
}

TEST(MpCosine, MatchesPerPerspectiveCosine) {
  Rng rng(19);
  auto p = store(rng, {{"a", {2, 3}}, {"b", {2, 3}}, {"w", {4, 3}}});
  G g(p, nullptr);
  const auto& m = g.value(g.mp_cosine(g.param("a"), g.param("b"), g.param("w")));
  ASSERT_EQ(m.shape(), (std::vector<int>{2, 4}));
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 4; ++k) {
      double dot = 0, na = 0, nb = 0;
      for (int e = 0; e < 3; ++e) {
        const double x = p.at("w")(k, e) * p.at("a")(i, e);
        const double y = p.at("w")(k, e) * p.at("b")(i, e);
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      EXPECT_NEAR(m(i, k), dot / std::sqrt(na * nb), 1e-14);
    }
  }
}

TEST(MpCosine, GradientMatchesFiniteDifferences) {
  Rng rng(20);
  auto p = store(rng, {{"a", {3, 4}}, {"b", {3, 4}}, {"w", {2, 4}}});
  expect_grads(p, [](G& g) { return project(g, g.mp_cosine(g.param("a"), g.param("b"), g.param("w")), 9); });
}

TEST(TripletHinge, ValuesAndGradients) {
  ParamStore<double> p;
  p.add("sp", 1, 1).data[0] = 0.9;
  p.add("sn", 1, 1).data[0] = 0.1;
  {
    G g(p, nullptr);
    EXPECT_EQ(g.value(g.triplet_hinge(g.param("sp"), g.param("sn"), 0.05)).item(), 0.0);
  }
  p.at("sn").data[0] = 0.9;
  {
    G g(p, nullptr);
    EXPECT_NEAR(g.value(g.triplet_hinge(g.param("sp"), g.param("sn"), 0.05)).item(), 0.05, 1e-15);
  }
  p.at("sn").data[0] = 0.5;
  expect_grads(p, [](G& g) { return g.triplet_hinge(g.param("sp"), g.param("sn"), 0.05); });
}

TEST(Graph, NonFiniteForwardValuesAreCaught) {
  ParamStore<double> p;
  p.add("x", 1, 2) = T::row({1, std::numeric_limits<double>::infinity()});
  G g(p, nullptr);
  g.set_check_finite(true);
  EXPECT_THROW(g.maxpool_rows(g.param("x")), NumericError);
}

TEST(Graph, EvaluationGraphRefusesBackward) {
  ParamStore<double> p;
  p.add("x", 1, 1);
  G g(p, nullptr);
  EXPECT_THROW(g.backward(g.param("x")), ValidationError);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Rng rng(21);
  auto p = store(rng, {{"x", {2, 2}}});
  const auto before = p;
  auto st = make_adam(p);
  adam_step(p, p.zeros_like(), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 1);
}

TEST(Adam, ZeroLearningRateLeavesParameters) {
  Rng rng(22);
  auto p = store(rng, {{"x", {2, 2}}});
  const auto before = p;
  auto st = make_adam(p, {.lr = 0.0});
  auto g = store(rng, {{"x", {2, 2}}});
  for (int i = 0; i < 5; ++i) adam_step(p, g, st);
  EXPECT_EQ(p, before);
}

TEST(Adam, MissingGradientIsAnError) {
  ParamStore<double> p;
  p.add("x", 1, 1);
  p.add("y", 1, 1);
  ParamStore<double> g;
  g.add("x", 1, 1);
  auto st = make_adam(p);
  EXPECT_THROW(adam_step(p, g, st), ValidationError);
}

// Constant gradient: closed-form moments m_t = g(1-b1^t), v_t = g^2(1-b2^t),
// so each bias-corrected step is lr * g / (|g| + eps).
TEST(Adam, ConstantGradientMatchesClosedForm) {
  for (double gval : {0.3, -2.0}) {
    ParamStore<double> p;
    p.add("x", 1, 1).data[0] = 1.0;
    ParamStore<double> g;
    g.add("x", 1, 1).data[0] = gval;
    auto st = make_adam(p);
    double expected = 1.0;
    double prev = 1.0;
    for (int t = 1; t <= 200; ++t) {
      adam_step(p, g, st);
      const double m = gval * (1 - std::pow(0.9, t));
      const double v = gval * gval * (1 - std::pow(0.999, t));
      expected -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      const double x = p.at("x").item();
      ASSERT_NEAR(x, expected, 1e-12);
      ASSERT_EQ(x < prev, gval > 0);
      prev = x;
    }
    EXPECT_NEAR(std::abs(expected - 1.0) / 200, 1e-3, 1e-9);
  }
}

TEST(SkipGram, DeterministicAndMovesCooccurringTokensTogether) {
  std::vector<std::vector<int>> seqs;
  for (int i = 0; i < 200; ++i) {
    seqs.push_back({2, 3, 2, 3, 2, 3});
    seqs.push_back({4, 5, 4, 5, 4, 5});
  }
  T a(6, 8), b(6, 8);
  skipgram_pretrain(a, seqs, {}, 3);
  skipgram_pretrain(b, seqs, {}, 3);
  EXPECT_EQ(a, b);
  ParamStore<double> p;
  for (int r = 0; r < 6; ++r) p.add("r" + std::to_string(r), 1, 8) = T::from_matrix(a.mat().row(r));
  G g(p, nullptr);
  // Tokens 2 and 3 share contexts; 2 and 4 never meet.
  const double near = g.value(g.cosine(g.param("r2"), g.param("r3"))).item();
  const double far = g.value(g.cosine(g.param("r2"), g.param("r4"))).item();
  EXPECT_GT(near, far);
}

}  // namespace
}  // namespace codematch::nn
