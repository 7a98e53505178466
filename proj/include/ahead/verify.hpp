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

// Randomized self-checks shared by the `distill-check` subcommand and the
// acceptance suite: finite-difference gradient checks for both distillation
// losses and an exhaustive-enumeration check of the assignment solver.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "ahead/assignment.hpp"
#include "ahead/distill.hpp"
#include "ahead/scenes.hpp"

namespace ahead::verify {

// Minimum assignment cost by enumerating every injection of the shorter
// side into the longer one.
inline double brute_force_min_cost(const CostMatrix& c) {
  const bool transpose = c.rows() > c.cols();
  const std::size_t small = transpose ? c.cols() : c.rows();
  const std::size_t large = transpose ? c.rows() : c.cols();
  auto at = [&](std::size_t s, std::size_t l) {
    return transpose ? c(l, s) : c(s, l);
  };
  std::vector<char> used(large, 0);
  double best = std::numeric_limits<double>::infinity();
  auto recurse = [&](auto&& self, std::size_t s, double acc) -> void {
    if (s == small) {
      best = std::min(best, acc);
      return;
    }
    for (std::size_t l = 0; l < large; ++l) {
      if (used[l]) continue;
      used[l] = 1;
      self(self, s + 1, acc + at(s, l));
      used[l] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return best;
}

struct CheckOutcome {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  std::string worst_case;  // configuration of the worst trial
};

struct CheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tolerance = 1e-4;
  // Harness self-test: negate every analytic gradient.
  bool inject_sign_flip = false;
};

inline CheckOutcome check_feature_gradients(const CheckOptions& opt) {
  CheckOutcome out{"masked_feature_loss gradient", 0.0, opt.tolerance, true, {}};
  double masked_out_numeric = 0.0;
  bool masked_out_exact = true;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    auto rng = detail::stream(opt.seed, trial, 10);
    const auto C = static_cast<std::size_t>(detail::uniform_int(rng, 1, 8));
    const auto H = static_cast<std::size_t>(detail::uniform_int(rng, 1, 16));
    const auto W = static_cast<std::size_t>(detail::uniform_int(rng, 1, 16));
    FeatureGrid<double> fs(C, H, W), ft(C, H, W);
    for (auto& v : ft.values()) v = detail::normal(rng);
    BinaryMask mask(H, W);
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        mask.set(i, j, detail::uniform(rng, 0.0, 1.0) < 0.5);
      }
    }
    if (mask.count() == 0) mask.set(0, 0, true);
    // Keep every cell's difference norm well away from zero.
    for (std::size_t i = 0; i < H; ++i) {
      for (std::size_t j = 0; j < W; ++j) {
        double sq = 0.0;
        do {
          sq = 0.0;
          for (std::size_t c = 0; c < C; ++c) {
            fs(c, i, j) = ft(c, i, j) + detail::normal(rng);
            const double d = fs(c, i, j) - ft(c, i, j);
            sq += d * d;
          }
        } while (std::sqrt(sq) < 1e-3);
      }
    }
    auto analytic = masked_feature_loss(fs, ft, mask).grad;
    std::vector<double> grad(analytic.values().begin(), analytic.values().end());
    if (opt.inject_sign_flip) {
      for (double& g : grad) g = -g;
    }
    const auto ft_long = ft.cast<long double>();
    auto loss = [&](std::span<const long double> x) {
      FeatureGrid<long double> g(C, H, W,
                                 std::vector<long double>(x.begin(), x.end()));
      return masked_feature_loss(g, ft_long, mask).loss;
    };
    const auto check = finite_difference_check(loss, fs.values(), grad, opt.step);
    if (check.max_relative_error > out.max_error) {
      out.max_error = check.max_relative_error;
      out.worst_case = "trial " + std::to_string(trial) + " seed " +
                       std::to_string(opt.seed) + " C=" + std::to_string(C) +
                       " H=" + std::to_string(H) + " W=" + std::to_string(W) +
                       " coord " + std::to_string(check.worst_index);
    }
    // Cells outside the mask: analytic gradient exactly zero and the
    // numeric derivative vanishes.
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t i = 0; i < H; ++i) {
        for (std::size_t j = 0; j < W; ++j) {
          if (mask(i, j)) continue;
          if (analytic(c, i, j) != 0.0) masked_out_exact = false;
          std::vector<long double> x(fs.values().begin(), fs.values().end());
          const std::size_t k = (c * H + i) * W + j;
          x[k] += opt.step;
          const long double up = loss(x);
          x[k] -= 2 * opt.step;
          const long double down = loss(x);
          masked_out_numeric = std::max(
              masked_out_numeric,
              static_cast<double>(std::abs((up - down) / (2 * opt.step))));
        }
      }
    }
  }
  out.passed = out.max_error < opt.tolerance && masked_out_exact &&
               masked_out_numeric < 1e-8;
  if (!masked_out_exact || masked_out_numeric >= 1e-8) {
    out.worst_case += " (masked-out cell gradient not zero)";
  }
  return out;
}

inline CheckOutcome check_logits_gradients(const CheckOptions& opt) {
  CheckOutcome out{"logits_kd_loss gradient", 0.0, opt.tolerance, true, {}};
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    auto rng = detail::stream(opt.seed, trial, 11);
    const auto ns = static_cast<std::size_t>(detail::uniform_int(rng, 1, 8));
    const auto nt = static_cast<std::size_t>(
        detail::uniform_int(rng, static_cast<int>(ns), 8));
    const auto K = static_cast<std::size_t>(detail::uniform_int(rng, 2, 5));
    DistillConfig cfg;
    cfg.temperature = detail::uniform(rng, 0.5, 4.0);
    QuerySet<double> qs{ns, K, std::vector<double>(ns * K), 0, {}};
    QuerySet<double> qt{nt, K, std::vector<double>(nt * K), 0, {}};
    for (auto& v : qs.logits) v = 2.0 * detail::normal(rng);
    for (auto& v : qt.logits) v = 2.0 * detail::normal(rng);

    const Assignment matching = query_match(qs, qt, cfg);
    auto grad = logits_kd_loss(qs, qt, matching, cfg).grad;
    if (opt.inject_sign_flip) {
      for (double& g : grad) g = -g;
    }
    const auto qt_long = qt.cast<long double>();
    auto loss = [&](std::span<const long double> x) {
      QuerySet<long double> q{ns, K, std::vector<long double>(x.begin(), x.end()),
                              0, {}};
      return logits_kd_loss(q, qt_long, matching, cfg).loss;
    };
    const auto check = finite_difference_check(loss, qs.logits, grad, opt.step);
    if (check.max_relative_error > out.max_error) {
      out.max_error = check.max_relative_error;
      out.worst_case = "trial " + std::to_string(trial) + " seed " +
                       std::to_string(opt.seed) + " n_s=" + std::to_string(ns) +
                       " n_t=" + std::to_string(nt) + " K=" + std::to_string(K) +
                       " coord " + std::to_string(check.worst_index);
    }
  }
  out.passed = out.max_error < opt.tolerance;
  return out;
}

inline CheckOutcome check_assignment(const CheckOptions& opt) {
  CheckOutcome out{"hungarian_min_cost optimality", 0.0, 1e-9, true, {}};
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    auto rng = detail::stream(opt.seed, trial, 12);
    const auto rows = static_cast<std::size_t>(detail::uniform_int(rng, 1, 7));
    const auto cols = static_cast<std::size_t>(detail::uniform_int(rng, 1, 7));
    const bool integer = trial % 2 == 0;
    std::vector<double> values(rows * cols);
    for (double& v : values) {
      v = integer ? static_cast<double>(detail::uniform_int(rng, -5, 20))
                  : detail::uniform(rng, -10.0, 10.0);
    }
    const CostMatrix c(rows, cols, values);
    const double got = hungarian_min_cost(c).total_cost;
    const double want = brute_force_min_cost(c);
    const double err = std::abs(got - want);
    const bool ok = integer ? got == want : err <= 1e-9;
    if (err > out.max_error || !ok) {
      out.max_error = std::max(out.max_error, err);
      if (!ok) {
        out.passed = false;
        out.worst_case = "trial " + std::to_string(trial) + " seed " +
                         std::to_string(opt.seed) + " " + std::to_string(rows) +
                         "x" + std::to_string(cols);
      }
    }
  }
  return out;
}

inline std::vector<CheckOutcome> run_distill_checks(const CheckOptions& opt) {
  return {check_feature_gradients(opt), check_logits_gradients(opt),
          check_assignment(opt)};
}

}  // namespace ahead::verify
