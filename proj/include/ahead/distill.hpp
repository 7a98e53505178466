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

// Distillation loss kernels with analytic gradients:
//  * masked multi-level BEV feature distillation, the mask-normalized sum of
//    per-cell channel-difference norms;
//  * asymmetric query distillation, KL divergence between temperature
//    softmaxes of Hungarian-matched student / teacher query logits.
//
// Kernels are templated on the scalar type so the finite-difference harness
// can evaluate them in extended precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ahead/assignment.hpp"
#include "ahead/errors.hpp"

namespace ahead {

template <class Real = double>
class FeatureGrid {
 public:
  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width)
      : FeatureGrid(channels, height, width,
                    std::vector<Real>(channels * height * width, Real(0))) {}

  FeatureGrid(std::size_t channels, std::size_t height, std::size_t width,
              std::vector<Real> values)
      : channels_(channels), height_(height), width_(width),
        values_(std::move(values)) {
    if (channels_ == 0 || height_ == 0 || width_ == 0) {
      throw InvalidArgument("feature grid dimensions must be >= 1");
    }
    if (values_.size() != channels_ * height_ * width_) {
      throw InvalidArgument("feature grid value count does not match C*H*W");
    }
    for (const Real& v : values_) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
    }
  }

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::span<const Real> values() const { return values_; }
  std::span<Real> values() { return values_; }

  Real& operator()(std::size_t c, std::size_t i, std::size_t j) {
    return values_[(c * height_ + i) * width_ + j];
  }
  const Real& operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return values_[(c * height_ + i) * width_ + j];
  }

  bool same_shape(const FeatureGrid& o) const {
    return channels_ == o.channels_ && height_ == o.height_ &&
           width_ == o.width_;
  }

  template <class Other>
  FeatureGrid<Other> cast() const {
    return FeatureGrid<Other>(channels_, height_, width_,
                              std::vector<Other>(values_.begin(), values_.end()));
  }

 private:
  std::size_t channels_;
  std::size_t height_;
  std::size_t width_;
  std::vector<Real> values_;
};

class BinaryMask {
 public:
  BinaryMask(std::size_t height, std::size_t width)
      : height_(height), width_(width), values_(height * width, 0) {
    if (height_ == 0 || width_ == 0) {
      throw InvalidArgument("mask dimensions must be >= 1");
    }
  }

  BinaryMask(std::size_t height, std::size_t width,
             std::vector<std::uint8_t> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (height_ == 0 || width_ == 0) {
      throw InvalidArgument("mask dimensions must be >= 1");
    }
    if (values_.size() != height_ * width_) {
      throw InvalidArgument("mask value count does not match H*W");
    }
    for (std::uint8_t v : values_) {
      if (v > 1) throw InvalidArgument("mask entries must be 0 or 1");
    }
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  bool operator()(std::size_t i, std::size_t j) const {
    return values_[i * width_ + j] != 0;
  }
  void set(std::size_t i, std::size_t j, bool on) {
    values_[i * width_ + j] = on ? 1 : 0;
  }
  std::size_t count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values_) n += v;
    return n;
  }

 private:
  std::size_t height_;
  std::size_t width_;
  std::vector<std::uint8_t> values_;
};

template <class Real = double>
struct QuerySet {
  std::size_t n = 0;
  std::size_t num_classes = 4;  // K, including background
  std::vector<Real> logits;     // n x K, row-major
  // Optional regressed vertices, n x num_points x 2.
  std::size_t num_points = 0;
  std::vector<Real> points;

  std::span<const Real> row(std::size_t i) const {
    return std::span<const Real>(logits).subspan(i * num_classes, num_classes);
  }
  bool has_points() const { return num_points > 0; }

  void validate() const {
    if (num_classes == 0) throw InvalidArgument("query class dimension is 0");
    if (logits.size() != n * num_classes) {
      throw InvalidArgument("query logits size does not match n*K");
    }
    for (const Real& v : logits) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite query logit");
    }
    if (num_points > 0) {
      if (num_points < 2) throw InvalidArgument("query point sets need P >= 2");
      if (points.size() != n * num_points * 2) {
        throw InvalidArgument("query points size does not match n*P*2");
      }
      for (const Real& v : points) {
        if (!std::isfinite(v)) throw InvalidArgument("non-finite query point");
      }
    }
  }

  template <class Other>
  QuerySet<Other> cast() const {
    return {n, num_classes,
            std::vector<Other>(logits.begin(), logits.end()), num_points,
            std::vector<Other>(points.begin(), points.end())};
  }
};

enum class MatchCost { kKlLogits, kKlPlusPoints };
enum class KlDirection { kStudentTeacher, kTeacherStudent };
enum class FeatureNorm { kL2, kSquaredL2 };

inline std::string_view to_string(MatchCost m) {
  return m == MatchCost::kKlLogits ? "kl_logits" : "kl_plus_points";
}
inline std::string_view to_string(KlDirection d) {
  return d == KlDirection::kStudentTeacher ? "student_teacher"
                                           : "teacher_student";
}
inline std::string_view to_string(FeatureNorm f) {
  return f == FeatureNorm::kL2 ? "l2" : "squared_l2";
}

struct DistillConfig {
  double temperature = 1.0;
  MatchCost match_cost = MatchCost::kKlLogits;
  double point_cost_weight = 0.0;
  // Below this per-cell norm the feature gradient is defined as zero.
  double grad_epsilon = 1e-12;
  KlDirection kl_direction = KlDirection::kStudentTeacher;
  FeatureNorm feature_norm = FeatureNorm::kL2;

  void validate() const {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
      throw InvalidArgument("temperature must be > 0");
    }
    if (!(point_cost_weight >= 0.0) || !std::isfinite(point_cost_weight)) {
      throw InvalidArgument("point_cost_weight must be >= 0");
    }
    if (!(grad_epsilon >= 0.0)) {
      throw InvalidArgument("grad_epsilon must be >= 0");
    }
  }
};

// ---------------------------------------------------------------------------
// Masked feature distillation

template <class Real>
struct FeatureLoss {
  Real loss;
  FeatureGrid<Real> grad;
};

template <class Real>
FeatureLoss<Real> masked_feature_loss(const FeatureGrid<Real>& fs,
                                      const FeatureGrid<Real>& ft,
                                      const BinaryMask& m,
                                      const DistillConfig& cfg = {}) {
  if (!fs.same_shape(ft)) {
    throw InvalidArgument("student and teacher feature shapes differ");
  }
  if (m.height() != fs.height() || m.width() != fs.width()) {
    throw InvalidArgument("mask shape does not match the feature grid");
  }
  const std::size_t active = m.count();
  if (active == 0) throw EmptyMask("mask selects no cells");

  const std::size_t C = fs.channels(), H = fs.height(), W = fs.width();
  const Real norm = Real(1) / static_cast<Real>(active);
  FeatureGrid<Real> grad(C, H, W);
  Real loss = 0;
  for (std::size_t i = 0; i < H; ++i) {
    for (std::size_t j = 0; j < W; ++j) {
      if (!m(i, j)) continue;
      Real sq = 0;
      for (std::size_t c = 0; c < C; ++c) {
        const Real d = fs(c, i, j) - ft(c, i, j);
        sq += d * d;
      }
      if (cfg.feature_norm == FeatureNorm::kSquaredL2) {
        loss += sq;
        for (std::size_t c = 0; c < C; ++c) {
          grad(c, i, j) = Real(2) * (fs(c, i, j) - ft(c, i, j)) * norm;
        }
        continue;
      }
      const Real cell = std::sqrt(sq);
      loss += cell;
      if (cell < static_cast<Real>(cfg.grad_epsilon) || cell == Real(0)) continue;
      for (std::size_t c = 0; c < C; ++c) {
        grad(c, i, j) = (fs(c, i, j) - ft(c, i, j)) / cell * norm;
      }
    }
  }
  return {loss * norm, std::move(grad)};
}

// ---------------------------------------------------------------------------
// Softmax and KL

template <class Real>
std::vector<Real> log_softmax(std::span<const Real> z, Real tau) {
  if (!(tau > Real(0))) throw InvalidArgument("temperature must be > 0");
  if (z.empty()) throw InvalidArgument("softmax of an empty vector");
  const Real top = *std::max_element(z.begin(), z.end());
  std::vector<Real> out(z.size());
  Real sum = 0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    out[k] = (z[k] - top) / tau;
    sum += std::exp(out[k]);
  }
  const Real log_sum = std::log(sum);
  for (Real& v : out) v -= log_sum;
  return out;
}

template <class Real>
std::vector<Real> softmax_with_temperature(std::span<const Real> z, Real tau) {
  auto out = log_softmax(z, tau);
  for (Real& v : out) v = std::exp(v);
  return out;
}

inline std::vector<double> softmax_with_temperature(
    std::initializer_list<double> z, double tau) {
  const std::vector<double> v(z);
  return softmax_with_temperature<double>(std::span<const double>(v), tau);
}

// KL(p || q) from log-probabilities.
template <class Real>
Real kl_from_logs(std::span<const Real> log_p, std::span<const Real> log_q) {
  Real sum = 0;
  for (std::size_t k = 0; k < log_p.size(); ++k) {
    sum += std::exp(log_p[k]) * (log_p[k] - log_q[k]);
  }
  return std::max(sum, Real(0));
}

// Divergence between one student row and one teacher row, in the configured
// direction.
template <class Real>
Real logits_divergence(std::span<const Real> student,
                       std::span<const Real> teacher, const DistillConfig& cfg) {
  const Real tau = static_cast<Real>(cfg.temperature);
  const auto ls = log_softmax(student, tau);
  const auto lt = log_softmax(teacher, tau);
  return cfg.kl_direction == KlDirection::kStudentTeacher
             ? kl_from_logs<Real>(ls, lt)
             : kl_from_logs<Real>(lt, ls);
}

// ---------------------------------------------------------------------------
// Query matching

template <class Real>
void check_query_pair(const QuerySet<Real>& qs, const QuerySet<Real>& qt) {
  qs.validate();
  qt.validate();
  if (qs.num_classes != qt.num_classes) {
    throw InvalidArgument("student and teacher class dimensions differ");
  }
  if (qs.n > qt.n) {
    throw InvalidArgument("student has more queries (" + std::to_string(qs.n) +
                          ") than teacher (" + std::to_string(qt.n) + ")");
  }
  if (qs.n == 0) throw InvalidArgument("student query set is empty");
}

// Cost of pairing student i with teacher j: logits divergence plus, in
// kl_plus_points mode, lambda times the mean absolute coordinate difference
// of the regressed point sets.
template <class Real>
CostMatrix query_cost_matrix(const QuerySet<Real>& qs, const QuerySet<Real>& qt,
                             const DistillConfig& cfg) {
  cfg.validate();
  check_query_pair(qs, qt);
  const bool use_points = cfg.match_cost == MatchCost::kKlPlusPoints &&
                          qs.has_points() && qt.has_points() &&
                          cfg.point_cost_weight > 0.0;
  if (use_points && qs.num_points != qt.num_points) {
    throw InvalidArgument("student and teacher point counts differ");
  }
  const Real tau = static_cast<Real>(cfg.temperature);
  std::vector<std::vector<Real>> ls(qs.n), lt(qt.n);
  for (std::size_t i = 0; i < qs.n; ++i) ls[i] = log_softmax(qs.row(i), tau);
  for (std::size_t j = 0; j < qt.n; ++j) lt[j] = log_softmax(qt.row(j), tau);

  CostMatrix cost(qs.n, qt.n);
  const std::size_t coords = qs.num_points * 2;
  for (std::size_t i = 0; i < qs.n; ++i) {
    for (std::size_t j = 0; j < qt.n; ++j) {
      Real c = cfg.kl_direction == KlDirection::kStudentTeacher
                   ? kl_from_logs<Real>(ls[i], lt[j])
                   : kl_from_logs<Real>(lt[j], ls[i]);
      if (use_points) {
        Real l1 = 0;
        for (std::size_t k = 0; k < coords; ++k) {
          l1 += std::abs(qs.points[i * coords + k] - qt.points[j * coords + k]);
        }
        c += static_cast<Real>(cfg.point_cost_weight) * l1 /
             static_cast<Real>(coords);
      }
      cost.at(i, j) = static_cast<double>(c);
    }
  }
  return cost;
}

template <class Real>
Assignment query_match(const QuerySet<Real>& qs, const QuerySet<Real>& qt,
                       const DistillConfig& cfg = {}) {
  return hungarian_min_cost(query_cost_matrix(qs, qt, cfg));
}

// ---------------------------------------------------------------------------
// Logits distillation

template <class Real>
struct LogitsLoss {
  Real loss;
  std::vector<Real> grad;  // n_s x K, d loss / d student logits
};

// Sum over student queries of the divergence to their matched teacher
// query. The matching is treated as constant.
template <class Real>
LogitsLoss<Real> logits_kd_loss(const QuerySet<Real>& qs,
                                const QuerySet<Real>& qt,
                                const Assignment& matching,
                                const DistillConfig& cfg = {}) {
  cfg.validate();
  check_query_pair(qs, qt);
  std::vector<std::optional<std::size_t>> teacher_of(qs.n);
  for (const auto& [s, t] : matching.pairs) {
    if (s >= qs.n || t >= qt.n) {
      throw InvalidArgument("matching references a query out of range");
    }
    if (teacher_of[s]) {
      throw InvalidArgument("student query " + std::to_string(s) +
                            " matched twice");
    }
    teacher_of[s] = t;
  }
  const std::size_t K = qs.num_classes;
  const Real tau = static_cast<Real>(cfg.temperature);
  LogitsLoss<Real> out{Real(0), std::vector<Real>(qs.n * K, Real(0))};
  for (std::size_t i = 0; i < qs.n; ++i) {
    if (!teacher_of[i]) {
      throw InvalidArgument("student query " + std::to_string(i) +
                            " is unmatched");
    }
    const auto ls = log_softmax(qs.row(i), tau);
    const auto lt = log_softmax(qt.row(*teacher_of[i]), tau);
    Real* g = out.grad.data() + i * K;
    if (cfg.kl_direction == KlDirection::kStudentTeacher) {
      // d/dz_k sum_j p_j (log p_j - log q_j) = p_k (a_k - KL) / tau
      const Real kl = kl_from_logs<Real>(ls, lt);
      out.loss += kl;
      for (std::size_t k = 0; k < K; ++k) {
        g[k] = std::exp(ls[k]) * ((ls[k] - lt[k]) - kl) / tau;
      }
    } else {
      out.loss += kl_from_logs<Real>(lt, ls);
      for (std::size_t k = 0; k < K; ++k) {
        g[k] = (std::exp(ls[k]) - std::exp(lt[k])) / tau;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Total distillation loss

struct DistillBreakdown {
  double feat_basic = 0.0;
  double feat_refined = 0.0;
  double logits_kd = 0.0;
  double total = 0.0;
};

// Unit-weighted sum of the basic-level and refined-level masked feature
// losses (one shared mask) and the matched logits loss.
inline DistillBreakdown distill_breakdown(
    const FeatureGrid<double>& fs_basic, const FeatureGrid<double>& ft_basic,
    const FeatureGrid<double>& fs_refined, const FeatureGrid<double>& ft_refined,
    const BinaryMask& m, const QuerySet<double>& qs, const QuerySet<double>& qt,
    const DistillConfig& cfg = {}) {
  DistillBreakdown b;
  b.feat_basic = masked_feature_loss(fs_basic, ft_basic, m, cfg).loss;
  b.feat_refined = masked_feature_loss(fs_refined, ft_refined, m, cfg).loss;
  b.logits_kd = logits_kd_loss(qs, qt, query_match(qs, qt, cfg), cfg).loss;
  b.total = b.feat_basic + b.feat_refined + b.logits_kd;
  return b;
}

inline double distill_total(const FeatureGrid<double>& fs_basic,
                            const FeatureGrid<double>& ft_basic,
                            const FeatureGrid<double>& fs_refined,
                            const FeatureGrid<double>& ft_refined,
                            const BinaryMask& m, const QuerySet<double>& qs,
                            const QuerySet<double>& qt,
                            const DistillConfig& cfg = {}) {
  return distill_breakdown(fs_basic, ft_basic, fs_refined, ft_refined, m, qs,
                           qt, cfg)
      .total;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
};

// Central differences of `loss` (evaluated in long double) at `x`, compared
// coordinate-wise against `analytic`. The relative error of a coordinate is
// |analytic - numeric| / max(1e-8, |numeric|).
inline GradientCheck finite_difference_check(
    const std::function<long double(std::span<const long double>)>& loss,
    std::span<const double> x, std::span<const double> analytic,
    double h = 1e-5) {
  if (!(h > 0.0)) throw InvalidArgument("finite-difference step must be > 0");
  if (x.size() != analytic.size()) {
    throw InvalidArgument("gradient size does not match the input size");
  }
  std::vector<long double> point(x.begin(), x.end());
  GradientCheck out;
  const long double step = h;
  for (std::size_t k = 0; k < point.size(); ++k) {
    const long double saved = point[k];
    point[k] = saved + step;
    const long double up = loss(point);
    point[k] = saved - step;
    const long double down = loss(point);
    point[k] = saved;
    const double numeric = static_cast<double>((up - down) / (2 * step));
    const double err =
        std::abs(analytic[k] - numeric) / std::max(1e-8, std::abs(numeric));
    if (err > out.max_relative_error) {
      out.max_relative_error = err;
      out.worst_index = k;
    }
  }
  return out;
}

}  // namespace ahead
