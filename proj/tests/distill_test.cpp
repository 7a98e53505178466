/* Copyright 2026 The aheadeval Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ahead/distill.hpp"
#include "ahead/verify.hpp"
#include "oracles.hpp"

namespace ahead {
namespace {

FeatureGrid<double> random_grid(std::mt19937_64& rng, std::size_t C, std::size_t H,
                                std::size_t W) {
  std::normal_distribution<double> n;
  FeatureGrid<double> g(C, H, W);
  for (auto& v : g.values()) v = n(rng);
  return g;
}

BinaryMask random_mask(std::mt19937_64& rng, std::size_t H, std::size_t W) {
  BinaryMask m(H, W);
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) m.set(i, j, rng() % 2);
  }
  m.set(0, 0, true);
  return m;
}

QuerySet<double> random_queries(std::mt19937_64& rng, std::size_t n, std::size_t K,
                                std::size_t P = 0) {
  std::normal_distribution<double> g(0.0, 2.0);
  QuerySet<double> q{n, K, std::vector<double>(n * K), P, std::vector<double>(n * P * 2)};
  for (auto& v : q.logits) v = g(rng);
  for (auto& v : q.points) v = g(rng);
  return q;
}

TEST(FeatureLoss, Examples) {
  std::mt19937_64 rng(1);
  const auto f = random_grid(rng, 3, 4, 5);
  const auto same = masked_feature_loss(f, f, random_mask(rng, 4, 5));
  EXPECT_EQ(same.loss, 0.0);
  for (double g : same.grad.values()) EXPECT_EQ(g, 0.0);

  const FeatureGrid<double> two(1, 1, 1, {2.0}), zero(1, 1, 1, {0.0});
  const auto single = masked_feature_loss(two, zero, BinaryMask(1, 1, {1}));
  EXPECT_DOUBLE_EQ(single.loss, 2.0);
  EXPECT_DOUBLE_EQ(single.grad(0, 0, 0), 1.0);

  // Cell differences (3,0) and (3,4) have norms 3 and 5.
  const FeatureGrid<double> fs(2, 1, 2, {3.0, 3.0, 0.0, 4.0});
  const FeatureGrid<double> ft(2, 1, 2);
  const auto r = masked_feature_loss(fs, ft, BinaryMask(1, 2, {1, 0}));
  EXPECT_DOUBLE_EQ(r.loss, 3.0);
  EXPECT_DOUBLE_EQ(masked_feature_loss(fs, ft, BinaryMask(1, 2, {0, 1})).loss, 5.0);
}

TEST(FeatureLoss, Errors) {
  const FeatureGrid<double> a(2, 3, 3), b(2, 3, 4);
  EXPECT_THROW(masked_feature_loss(a, b, BinaryMask(3, 3)), InvalidArgument);
  EXPECT_THROW(masked_feature_loss(a, a, BinaryMask(3, 4)), InvalidArgument);
  EXPECT_THROW(masked_feature_loss(a, a, BinaryMask(3, 3)), EmptyMask);
}

TEST(FeatureLoss, AllOnesMaskIsMeanCellNorm) {
  std::mt19937_64 rng(2);
  const auto fs = random_grid(rng, 4, 6, 7), ft = random_grid(rng, 4, 6, 7);
  BinaryMask all(6, 7, std::vector<std::uint8_t>(42, 1));
  double sum = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 7; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < 4; ++c) sq += std::pow(fs(c, i, j) - ft(c, i, j), 2);
      sum += std::sqrt(sq);
    }
  }
  EXPECT_NEAR(masked_feature_loss(fs, ft, all).loss, sum / 42.0, 1e-12);
}

TEST(FeatureLoss, ChannelPermutationInvariant) {
  std::mt19937_64 rng(3);
  const auto fs = random_grid(rng, 5, 4, 4), ft = random_grid(rng, 5, 4, 4);
  const auto m = random_mask(rng, 4, 4);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  FeatureGrid<double> ps(5, 4, 4), pt(5, 4, 4);
  for (std::size_t c = 0; c < 5; ++c) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        ps(c, i, j) = fs(perm[c], i, j);
        pt(c, i, j) = ft(perm[c], i, j);
      }
    }
  }
  EXPECT_NEAR(masked_feature_loss(fs, ft, m).loss, masked_feature_loss(ps, pt, m).loss,
              1e-12);
}

TEST(FeatureLoss, EnlargingMaskKeepsExistingContributions) {
  std::mt19937_64 rng(4);
  const auto fs = random_grid(rng, 3, 5, 5), ft = random_grid(rng, 3, 5, 5);
  BinaryMask m(5, 5);
  m.set(1, 1, true);
  m.set(2, 3, true);
  const double before = masked_feature_loss(fs, ft, m).loss * 2.0;
  BinaryMask single(5, 5);
  single.set(4, 0, true);
  const double added = masked_feature_loss(fs, ft, single).loss;
  m.set(4, 0, true);
  EXPECT_NEAR(masked_feature_loss(fs, ft, m).loss * 3.0, before + added, 1e-12);
  EXPECT_EQ(masked_feature_loss(fs, fs, m).loss, 0.0);
}

TEST(FeatureLoss, ZeroDifferenceCellHasZeroGradient) {
  FeatureGrid<double> fs(2, 1, 2, {1.0, 5.0, 2.0, 7.0});
  FeatureGrid<double> ft(2, 1, 2, {1.0, 4.0, 2.0, 3.0});
  const auto r = masked_feature_loss(fs, ft, BinaryMask(1, 2, {1, 1}));
  EXPECT_EQ(r.grad(0, 0, 0), 0.0);
  EXPECT_EQ(r.grad(1, 0, 0), 0.0);
}

TEST(FeatureLoss, SquaredModeGradient) {
  std::mt19937_64 rng(5);
  const auto fs = random_grid(rng, 2, 3, 3), ft = random_grid(rng, 2, 3, 3);
  const auto m = random_mask(rng, 3, 3);
  DistillConfig cfg;
  cfg.feature_norm = FeatureNorm::kSquaredL2;
  const auto r = masked_feature_loss(fs, ft, m, cfg);
  const auto ftl = ft.cast<long double>();
  auto loss = [&](std::span<const long double> x) {
    FeatureGrid<long double> g(2, 3, 3, std::vector<long double>(x.begin(), x.end()));
    return masked_feature_loss(g, ftl, m, cfg).loss;
  };
  EXPECT_LT(finite_difference_check(loss, fs.values(), r.grad.values()).max_relative_error,
            1e-6);
}

TEST(Softmax, Examples) {
  auto p = softmax_with_temperature({0.0, 0.0}, 1.0);
  EXPECT_DOUBLE_EQ(p[0], 0.5);
  EXPECT_DOUBLE_EQ(p[1], 0.5);
  p = softmax_with_temperature({1000.0, 0.0}, 1.0);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 0.0, 1e-15);
  EXPECT_TRUE(std::isfinite(p[0]) && std::isfinite(p[1]));
  p = softmax_with_temperature({std::log(2.0), 0.0}, 1.0);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
  EXPECT_THROW(softmax_with_temperature({1.0, 2.0}, 0.0), InvalidArgument);
  EXPECT_THROW(softmax_with_temperature({1.0, 2.0}, -1.0), InvalidArgument);
}

TEST(Softmax, TemperatureFlattens) {
  const auto sharp = softmax_with_temperature({2.0, 0.0, -1.0}, 0.5);
  const auto flat = softmax_with_temperature({2.0, 0.0, -1.0}, 4.0);
  EXPECT_GT(sharp[0], flat[0]);
  EXPECT_NEAR(std::accumulate(flat.begin(), flat.end(), 0.0), 1.0, 1e-15);
}

TEST(LogitsLoss, ClosedFormKl) {
  const QuerySet<double> qs{1, 2, {0.0, 0.0}, 0, {}};
  const QuerySet<double> qt{1, 2, {std::log(2.0), 0.0}, 0, {}};
  const Assignment a{{{0, 0}}, 0.0};
  const double expected = 0.5 * std::log(0.75) + 0.5 * std::log(1.5);
  EXPECT_NEAR(expected, 0.058891, 1e-6);
  // Numeric oracle: direct sum over the two classes.
  const double p[2] = {0.5, 0.5}, q[2] = {2.0 / 3.0, 1.0 / 3.0};
  const double numeric = p[0] * std::log(p[0] / q[0]) + p[1] * std::log(p[1] / q[1]);
  const auto r = logits_kd_loss(qs, qt, a);
  EXPECT_NEAR(r.loss, expected, 1e-15);
  EXPECT_NEAR(r.loss, numeric, 1e-15);
}

TEST(LogitsLoss, IdenticalLogitsGiveZero) {
  std::mt19937_64 rng(6);
  const auto q = random_queries(rng, 4, 3);
  Assignment a;
  for (std::size_t i = 0; i < 4; ++i) a.pairs.emplace_back(i, i);
  for (auto dir : {KlDirection::kStudentTeacher, KlDirection::kTeacherStudent}) {
    DistillConfig cfg;
    cfg.kl_direction = dir;
    const auto r = logits_kd_loss(q, q, a, cfg);
    EXPECT_NEAR(r.loss, 0.0, 1e-15);
    for (double g : r.grad) EXPECT_NEAR(g, 0.0, 1e-15);
  }
}

TEST(LogitsLoss, ZeroIffSameDistribution) {
  // Shifting a row by a constant keeps the softmax; scaling does not.
  const QuerySet<double> qs{1, 3, {1.0, 2.0, 3.0}, 0, {}};
  const QuerySet<double> shifted{1, 3, {6.0, 7.0, 8.0}, 0, {}};
  const QuerySet<double> scaled{1, 3, {2.0, 4.0, 6.0}, 0, {}};
  const Assignment a{{{0, 0}}, 0.0};
  EXPECT_LT(logits_kd_loss(qs, shifted, a).loss, 1e-12);
  EXPECT_GT(logits_kd_loss(qs, scaled, a).loss, 1e-3);
}

TEST(LogitsLoss, UnmatchedStudentRejected) {
  std::mt19937_64 rng(7);
  const auto qs = random_queries(rng, 2, 3), qt = random_queries(rng, 3, 3);
  EXPECT_THROW(logits_kd_loss(qs, qt, Assignment{{{0, 1}}, 0.0}), InvalidArgument);
  EXPECT_THROW(logits_kd_loss(qs, qt, Assignment{{{0, 1}, {1, 9}}, 0.0}), InvalidArgument);
}

TEST(QueryMatch, Examples) {
  std::mt19937_64 rng(8);
  const auto qs = random_queries(rng, 5, 4);
  // Teacher rows are a permutation of the student rows.
  const std::vector<std::size_t> perm{2, 4, 0, 1, 3};
  QuerySet<double> qt{5, 4, std::vector<double>(20), 0, {}};
  for (std::size_t j = 0; j < 5; ++j) {
    for (std::size_t k = 0; k < 4; ++k) qt.logits[j * 4 + k] = qs.logits[perm[j] * 4 + k];
  }
  const auto a = query_match(qs, qt);
  EXPECT_NEAR(a.total_cost, 0.0, 1e-12);
  for (const auto& [s, t] : a.pairs) EXPECT_EQ(perm[t], s);

  const QuerySet<double> one{1, 3, {0.5, 1.0, -1.0}, 0, {}};
  const QuerySet<double> two{2, 3, {0.5, 1.0, -1.0, 9.0, -9.0, 0.0}, 0, {}};
  EXPECT_EQ(query_match(one, two).pairs,
            (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}}));
}

TEST(QueryMatch, Errors) {
  std::mt19937_64 rng(9);
  EXPECT_THROW(query_match(random_queries(rng, 3, 4), random_queries(rng, 2, 4)),
               InvalidArgument);
  EXPECT_THROW(query_match(random_queries(rng, 2, 4), random_queries(rng, 3, 5)),
               InvalidArgument);
}

TEST(QueryMatch, MatchesBruteForceAndTeacherPermutation) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t ns = 1 + rng() % 4, nt = ns + rng() % 3, K = 2 + rng() % 4;
    const auto qs = random_queries(rng, ns, K, 3), qt = random_queries(rng, nt, K, 3);
    DistillConfig cfg;
    if (trial % 2) {
      cfg.match_cost = MatchCost::kKlPlusPoints;
      cfg.point_cost_weight = 0.5;
    }
    const auto cost = query_cost_matrix(qs, qt, cfg);
    std::vector<double> v;
    for (std::size_t i = 0; i < ns; ++i) {
      for (std::size_t j = 0; j < nt; ++j) v.push_back(cost(i, j));
    }
    const auto a = query_match(qs, qt, cfg);
    EXPECT_NEAR(a.total_cost, oracle::brute_min_assignment(v, ns, nt), 1e-9);

    std::vector<std::size_t> perm(nt);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    QuerySet<double> pt = qt;
    for (std::size_t j = 0; j < nt; ++j) {
      for (std::size_t k = 0; k < K; ++k) pt.logits[j * K + k] = qt.logits[perm[j] * K + k];
      for (std::size_t k = 0; k < 6; ++k) pt.points[j * 6 + k] = qt.points[perm[j] * 6 + k];
    }
    EXPECT_NEAR(query_match(qs, pt, cfg).total_cost, a.total_cost, 1e-12);
  }
}

TEST(QueryMatch, PointCostIsWeightedMeanAbsoluteDifference) {
  const QuerySet<double> qs{1, 2, {0.0, 0.0}, 2, {0, 0, 1, 1}};
  const QuerySet<double> qt{1, 2, {0.0, 0.0}, 2, {1, 0, 1, 3}};
  DistillConfig cfg;
  cfg.match_cost = MatchCost::kKlPlusPoints;
  cfg.point_cost_weight = 2.0;
  EXPECT_DOUBLE_EQ(query_cost_matrix(qs, qt, cfg)(0, 0), 2.0 * 3.0 / 4.0);
}

TEST(DistillTotal, Additivity) {
  std::mt19937_64 rng(11);
  const auto fb = random_grid(rng, 3, 4, 4), fr = random_grid(rng, 3, 4, 4);
  const auto tb = random_grid(rng, 3, 4, 4), tr = random_grid(rng, 3, 4, 4);
  const auto m = random_mask(rng, 4, 4);
  const auto qs = random_queries(rng, 3, 4), qt = random_queries(rng, 5, 4);

  const double want = masked_feature_loss(fb, tb, m).loss +
                      masked_feature_loss(fr, tr, m).loss +
                      logits_kd_loss(qs, qt, query_match(qs, qt)).loss;
  EXPECT_NEAR(distill_total(fb, tb, fr, tr, m, qs, qt), want, 1e-12);

  EXPECT_EQ(distill_total(tb, tb, tr, tr, m, qt, qt), 0.0);
  // Only the refined level differs.
  EXPECT_NEAR(distill_total(tb, tb, fr, tr, m, qt, qt),
              masked_feature_loss(fr, tr, m).loss, 1e-12);
}

TEST(FiniteDifference, GradientSuitePasses) {
  verify::CheckOptions opt;
  opt.trials = 20;
  opt.seed = 3;
  for (const auto& r : verify::run_distill_checks(opt)) {
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_error << " " << r.worst_case;
  }
}

TEST(FiniteDifference, SignFlipIsCaught) {
  verify::CheckOptions opt;
  opt.trials = 5;
  opt.inject_sign_flip = true;
  const auto r = verify::run_distill_checks(opt);
  EXPECT_FALSE(r[0].passed);
  EXPECT_FALSE(r[1].passed);
}

TEST(FiniteDifference, ReverseKlDirection) {
  std::mt19937_64 rng(12);
  const auto qs = random_queries(rng, 3, 4), qt = random_queries(rng, 4, 4);
  DistillConfig cfg;
  cfg.kl_direction = KlDirection::kTeacherStudent;
  cfg.temperature = 2.0;
  const auto a = query_match(qs, qt, cfg);
  const auto r = logits_kd_loss(qs, qt, a, cfg);
  const auto qtl = qt.cast<long double>();
  auto loss = [&](std::span<const long double> x) {
    QuerySet<long double> q{3, 4, std::vector<long double>(x.begin(), x.end()), 0, {}};
    return logits_kd_loss(q, qtl, a, cfg).loss;
  };
  EXPECT_LT(finite_difference_check(loss, qs.logits, r.grad).max_relative_error, 1e-4);
}

}  // namespace
}  // namespace ahead
