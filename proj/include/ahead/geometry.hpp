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

// Polyline primitives in the ego frame: x is lateral (right of ego
// positive), y is longitudinal (ahead of ego positive).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ahead/errors.hpp"

namespace ahead {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point2 a, Point2 b) {
  return std::sqrt(squared_distance(a, b));
}

inline bool is_finite(Point2 p) {
  return std::isfinite(p.x) && std::isfinite(p.y);
}

// An ordered vertex chain with at least two vertices, finite coordinates
// and no two consecutive vertices closer than kMinVertexSpacing.
class Polyline {
 public:
  static constexpr double kMinVertexSpacing = 1e-9;

  Polyline() = delete;
  explicit Polyline(std::vector<Point2> points) : points_(std::move(points)) {
    if (points_.size() < 2) {
      throw InvalidGeometry("polyline needs at least 2 points, got " +
                            std::to_string(points_.size()));
    }
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!is_finite(points_[i])) {
        throw InvalidGeometry("non-finite coordinate at vertex " +
                              std::to_string(i));
      }
      if (i > 0 && distance(points_[i - 1], points_[i]) <= kMinVertexSpacing) {
        throw InvalidGeometry("coincident consecutive vertices at index " +
                              std::to_string(i));
      }
    }
  }

  std::span<const Point2> points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  const Point2& operator[](std::size_t i) const { return points_[i]; }
  const Point2& front() const { return points_.front(); }
  const Point2& back() const { return points_.back(); }

  double length() const {
    double total = 0.0;
    for (std::size_t i = 1; i < points_.size(); ++i) {
      total += distance(points_[i - 1], points_[i]);
    }
    return total;
  }

  Polyline reversed() const {
    return Polyline(std::vector<Point2>(points_.rbegin(), points_.rend()));
  }

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<Point2> points_;
};

// Rigid pose of the ego vehicle in a global frame. `heading` is the
// counterclockwise rotation of the ego frame relative to the global frame;
// it is kept in (-pi, pi].
class EgoPose {
 public:
  EgoPose() = default;
  EgoPose(double x, double y, double heading)
      : x_(x), y_(y), heading_(normalize_angle(heading)) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(heading)) {
      throw InvalidArgument("ego pose must be finite");
    }
  }

  double x() const { return x_; }
  double y() const { return y_; }
  double heading() const { return heading_; }

  static double normalize_angle(double a) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    a = std::fmod(a, kTwoPi);
    if (a <= -std::numbers::pi) a += kTwoPi;
    if (a > std::numbers::pi) a -= kTwoPi;
    return a;
  }

 private:
  double x_ = 0.0;
  double y_ = 0.0;
  double heading_ = 0.0;
};

// Rectangular region of interest centred on the ego vehicle.
struct Roi {
  double lateral_extent = 15.0;       // half-width, meters
  double longitudinal_extent = 30.0;  // half-length, meters

  void validate() const {
    if (!(lateral_extent > 0.0) || !(longitudinal_extent > 0.0) ||
        !std::isfinite(lateral_extent) || !std::isfinite(longitudinal_extent)) {
      throw InvalidArgument("ROI extents must be positive and finite");
    }
  }

  bool contains(Point2 p) const {
    return std::abs(p.x) <= lateral_extent &&
           std::abs(p.y) <= longitudinal_extent;
  }

  friend bool operator==(const Roi&, const Roi&) = default;
};

// ---------------------------------------------------------------------------
// Resampling

// n points spaced uniformly by arc length; the endpoints are copied exactly.
inline std::vector<Point2> resample_points(const Polyline& p, std::size_t n) {
  if (n < 2) {
    throw InvalidArgument("resample count must be >= 2, got " +
                          std::to_string(n));
  }
  const auto pts = p.points();
  std::vector<double> cumulative(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    cumulative[i] = cumulative[i - 1] + distance(pts[i - 1], pts[i]);
  }
  const double total = cumulative.back();
  if (!(total > 0.0)) throw InvalidGeometry("polyline has zero length");

  std::vector<Point2> out;
  out.reserve(n);
  out.push_back(pts.front());
  std::size_t seg = 0;
  const double denom = static_cast<double>(n - 1);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double s = total * (static_cast<double>(k) / denom);
    while (seg + 2 < pts.size() && cumulative[seg + 1] < s) ++seg;
    const double seg_len = cumulative[seg + 1] - cumulative[seg];
    double t = seg_len > 0.0 ? (s - cumulative[seg]) / seg_len : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point2 a = pts[seg];
    const Point2 b = pts[seg + 1];
    out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
  }
  out.push_back(pts.back());
  return out;
}

inline Polyline resample_polyline(const Polyline& p, std::size_t n) {
  return Polyline(resample_points(p, n));
}

// Point count for fixed-spacing resampling: enough points that consecutive
// samples are at most `spacing` apart along the arc.
inline std::size_t count_for_spacing(const Polyline& p, double spacing) {
  if (!(spacing > 0.0)) throw InvalidArgument("resample spacing must be > 0");
  const double segments = std::ceil(p.length() / spacing);
  return std::max<std::size_t>(2, static_cast<std::size_t>(segments) + 1);
}

// ---------------------------------------------------------------------------
// Chamfer distance

namespace detail {

// Mean over `from` of the distance to the nearest point of `to`. When
// `abort_sum` is finite, gives up (returning +inf) as soon as the running
// sum of nearest distances exceeds it.
inline double mean_nearest(std::span<const Point2> from,
                           std::span<const Point2> to,
                           double abort_sum = std::numeric_limits<double>::infinity()) {
  double sum = 0.0;
  for (const Point2& a : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point2& b : to) {
      const double dx = a.x - b.x;
      const double dy = a.y - b.y;
      const double d2 = dx * dx + dy * dy;
      best = d2 < best ? d2 : best;
    }
    sum += std::sqrt(best);
    if (sum > abort_sum) return std::numeric_limits<double>::infinity();
  }
  return sum / static_cast<double>(from.size());
}

struct Box {
  double min_x, min_y, max_x, max_y;
};

inline Box bounding_box(std::span<const Point2> pts) {
  Box b{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Point2& p : pts) {
    b.min_x = std::min(b.min_x, p.x);
    b.max_x = std::max(b.max_x, p.x);
    b.min_y = std::min(b.min_y, p.y);
    b.max_y = std::max(b.max_y, p.y);
  }
  return b;
}

inline double box_distance(const Box& a, const Box& b) {
  const double dx = std::max({0.0, a.min_x - b.max_x, b.min_x - a.max_x});
  const double dy = std::max({0.0, a.min_y - b.max_y, b.min_y - a.max_y});
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

// 0.5 * (mean_a min_b |a-b| + mean_b min_a |a-b|), on point sets.
inline double chamfer_symmetric(std::span<const Point2> a,
                                std::span<const Point2> b) {
  if (a.empty() || b.empty()) {
    throw InvalidArgument("chamfer distance of an empty point set");
  }
  const double ab = detail::mean_nearest(a, b);
  const double ba = detail::mean_nearest(b, a);
  return 0.5 * (ab + ba);
}

// Same value as chamfer_symmetric whenever that value is <= bound; +inf
// otherwise. Used by the matcher, which only needs distances under the
// largest threshold.
inline double chamfer_bounded(std::span<const Point2> a,
                              std::span<const Point2> b, double bound) {
  if (a.empty() || b.empty()) {
    throw InvalidArgument("chamfer distance of an empty point set");
  }
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // Every nearest-neighbour distance is at least the box gap.
  const double gap =
      detail::box_distance(detail::bounding_box(a), detail::bounding_box(b));
  if (gap > bound * (1.0 + 1e-9) + 1e-12) return kInf;
  // 0.5 * ab > bound already rules the pair out; leave slack for rounding.
  const double slack = 1.0 + 1e-9;
  const double ab = detail::mean_nearest(
      a, b, 2.0 * bound * slack * static_cast<double>(a.size()) + 1e-9);
  if (!(0.5 * ab <= bound * slack)) return kInf;
  const double ba = detail::mean_nearest(
      b, a, (2.0 * bound * slack - ab) * static_cast<double>(b.size()) + 1e-9);
  if (ba == kInf) return kInf;
  const double value = 0.5 * (ab + ba);
  return value <= bound ? value : kInf;
}

// ---------------------------------------------------------------------------
// Frame transforms

inline Point2 transform_to_ego(Point2 p, const EgoPose& pose) {
  const double c = std::cos(pose.heading());
  const double s = std::sin(pose.heading());
  const double dx = p.x - pose.x();
  const double dy = p.y - pose.y();
  return {c * dx + s * dy, -s * dx + c * dy};
}

inline Point2 transform_from_ego(Point2 p, const EgoPose& pose) {
  const double c = std::cos(pose.heading());
  const double s = std::sin(pose.heading());
  return {c * p.x - s * p.y + pose.x(), s * p.x + c * p.y + pose.y()};
}

inline Polyline transform_to_ego(const Polyline& p, const EgoPose& pose) {
  std::vector<Point2> out;
  out.reserve(p.size());
  for (const Point2& q : p.points()) out.push_back(transform_to_ego(q, pose));
  return Polyline(std::move(out));
}

inline Polyline transform_from_ego(const Polyline& p, const EgoPose& pose) {
  std::vector<Point2> out;
  out.reserve(p.size());
  for (const Point2& q : p.points()) out.push_back(transform_from_ego(q, pose));
  return Polyline(std::move(out));
}

// ---------------------------------------------------------------------------
// Band clipping

enum class Axis { kLateral, kLongitudinal };
enum class Keep { kInside, kOutside };

inline constexpr double kDefaultMinFragmentLength = 0.1;

namespace detail {

inline double coord(Point2 p, Axis axis) {
  return axis == Axis::kLongitudinal ? p.y : p.x;
}

// Point on segment a->b at parameter t, with the clipped coordinate pinned
// to `value` so boundary vertices sit exactly on the boundary.
inline Point2 boundary_point(Point2 a, Point2 b, double t, Axis axis,
                             double value) {
  Point2 p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
  if (axis == Axis::kLongitudinal) {
    p.y = value;
  } else {
    p.x = value;
  }
  return p;
}

class FragmentBuilder {
 public:
  FragmentBuilder(double min_len, std::vector<Polyline>& out)
      : min_len_(min_len), out_(out) {}

  void add(Point2 p, bool on_boundary) {
    if (!current_.empty() &&
        distance(current_.back(), p) <= Polyline::kMinVertexSpacing) {
      if (on_boundary) current_.back() = p;
      return;
    }
    current_.push_back(p);
  }

  void flush() {
    if (current_.size() >= 2) {
      double len = 0.0;
      for (std::size_t i = 1; i < current_.size(); ++i) {
        len += distance(current_[i - 1], current_[i]);
      }
      if (len > 0.0 && len >= min_len_) out_.emplace_back(std::move(current_));
    }
    current_.clear();
  }

  bool empty() const { return current_.empty(); }

 private:
  double min_len_;
  std::vector<Polyline>& out_;
  std::vector<Point2> current_;
};

}  // namespace detail

// Splits `p` against the closed band lo <= coord <= hi along `axis` and
// returns the maximal pieces on the kept side, in traversal order. Each
// sub-segment is classified by its midpoint, so a piece running exactly
// along a boundary counts as inside; inside and outside therefore partition
// the arc length. Pieces shorter than `min_fragment_len` are dropped.
inline std::vector<Polyline> clip_to_band(
    const Polyline& p, Axis axis, double lo, double hi, Keep keep,
    double min_fragment_len = kDefaultMinFragmentLength) {
  if (!(lo < hi)) {
    throw InvalidArgument("clip band requires lo < hi");
  }
  if (!(min_fragment_len >= 0.0)) {
    throw InvalidArgument("min_fragment_len must be >= 0");
  }
  std::vector<Polyline> out;
  detail::FragmentBuilder builder(min_fragment_len, out);
  const auto pts = p.points();
  const bool keep_inside = keep == Keep::kInside;

  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2 a = pts[i];
    const Point2 b = pts[i + 1];
    const double ca = detail::coord(a, axis);
    const double cb = detail::coord(b, axis);

    struct Cut {
      double t;
      double value;
    };
    Cut cuts[2];
    int num_cuts = 0;
    for (double boundary : {lo, hi}) {
      if ((ca - boundary) * (cb - boundary) < 0.0) {
        cuts[num_cuts++] = {(boundary - ca) / (cb - ca), boundary};
      }
    }
    if (num_cuts == 2 && cuts[1].t < cuts[0].t) std::swap(cuts[0], cuts[1]);

    Point2 start = a;
    bool start_on_boundary = false;
    for (int k = 0; k <= num_cuts; ++k) {
      const bool last = k == num_cuts;
      const Point2 end =
          last ? b
               : detail::boundary_point(a, b, cuts[k].t, axis, cuts[k].value);
      const double mid =
          0.5 * (detail::coord(start, axis) + detail::coord(end, axis));
      const bool inside = lo <= mid && mid <= hi;
      if (inside == keep_inside) {
        if (builder.empty()) builder.add(start, start_on_boundary);
        builder.add(end, !last);
      } else {
        builder.flush();
      }
      start = end;
      start_on_boundary = !last;
    }
  }
  builder.flush();
  return out;
}

// Clips to the ROI rectangle (both axes), keeping the inside.
inline std::vector<Polyline> clip_to_roi(
    const Polyline& p, const Roi& roi,
    double min_fragment_len = kDefaultMinFragmentLength) {
  std::vector<Polyline> out;
  for (const Polyline& piece :
       clip_to_band(p, Axis::kLateral, -roi.lateral_extent,
                    roi.lateral_extent, Keep::kInside, min_fragment_len)) {
    auto inner = clip_to_band(piece, Axis::kLongitudinal,
                              -roi.longitudinal_extent,
                              roi.longitudinal_extent, Keep::kInside,
                              min_fragment_len);
    for (auto& q : inner) out.push_back(std::move(q));
  }
  return out;
}

}  // namespace ahead
