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

// Model-free downstream proxy: scores how well the map guides a reference
// path ahead of the ego vehicle. It only ever looks at geometry with y >= 0.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "ahead/errors.hpp"
#include "ahead/geometry.hpp"
#include "ahead/masking.hpp"
#include "ahead/metrics.hpp"

namespace ahead {

struct ReferencePath {
  std::string frame_id;
  std::vector<Point2> points;  // ordered, y non-decreasing, all y >= 0
  double horizon = 30.0;

  void validate() const {
    if (points.size() < 2) {
      throw InvalidArgument("reference path needs at least 2 points");
    }
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!is_finite(points[i])) {
        throw InvalidArgument("non-finite reference path point");
      }
      if (points[i].y < 0.0) {
        throw InvalidArgument("reference path points must have y >= 0");
      }
      if (i > 0 && points[i].y < points[i - 1].y) {
        throw InvalidArgument("reference path y must be non-decreasing");
      }
    }
  }

  friend bool operator==(const ReferencePath&, const ReferencePath&) = default;
};

struct ProxyParams {
  double lookup_radius = 5.0;
  double miss_penalty = 5.0;
  // Distance from a lane centre to its dividers for a 3.5 m lane.
  double expected_offset = 1.75;
};

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, {a.x + t * vx, a.y + t * vy});
}

// Mean per-sample guidance error along the path. A sample whose nearest
// divider / boundary (restricted to y >= 0) lies within the lookup radius
// costs max(0, d - expected_offset); otherwise it pays the miss penalty.
// Both costs are non-decreasing in d, so removing geometry can only raise
// the score.
inline double score_reference_path(const VectorMap& m, const ReferencePath& path,
                                   const ProxyParams& params = {}) {
  if (path.points.empty()) throw InvalidArgument("reference path is empty");
  path.validate();

  struct Segment {
    Point2 a, b;
  };
  std::vector<Segment> guidance;
  for (const MapInstance& inst : m.instances) {
    if (inst.cls == MapClass::kPedestrianCrossing) continue;
    for (const Polyline& piece :
         clip_to_band(inst.geometry, Axis::kLongitudinal, 0.0,
                      std::numeric_limits<double>::infinity(), Keep::kInside,
                      0.0)) {
      for (std::size_t i = 1; i < piece.size(); ++i) {
        guidance.push_back({piece[i - 1], piece[i]});
      }
    }
  }

  double total = 0.0;
  for (const Point2& sample : path.points) {
    double nearest = std::numeric_limits<double>::infinity();
    for (const Segment& s : guidance) {
      nearest = std::min(nearest, point_segment_distance(sample, s.a, s.b));
    }
    total += nearest <= params.lookup_radius
                 ? std::max(0.0, nearest - params.expected_offset)
                 : params.miss_penalty;
  }
  return total / static_cast<double>(path.points.size());
}

struct SensitivityPoint {
  double ratio;
  MaskDirection direction;
  double mean_score;
  double min_score;
  double max_score;
  std::vector<double> frame_scores;  // in dataset frame order
};

// Masks every frame at each ratio and scores it against that frame's path.
inline std::vector<SensitivityPoint> mask_sensitivity_study(
    const Dataset& maps, const std::vector<ReferencePath>& paths,
    const std::vector<double>& ratios, MaskDirection direction,
    MaskMode mode = MaskMode::kFarFirst, const ProxyParams& params = {}) {
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (!(ratios[i] >= 0.0 && ratios[i] <= 1.0)) {
      throw InvalidArgument("mask ratios must lie in [0, 1]");
    }
    if (i > 0 && ratios[i] < ratios[i - 1]) {
      throw InvalidArgument("mask ratios must be sorted ascending");
    }
  }
  if (maps.frames.empty()) throw InvalidArgument("no frames to study");
  std::map<std::string, const ReferencePath*> by_frame;
  for (const auto& p : paths) by_frame[p.frame_id] = &p;

  std::vector<SensitivityPoint> curve;
  for (double ratio : ratios) {
    SensitivityPoint pt{ratio, direction, 0.0,
                        std::numeric_limits<double>::infinity(),
                        -std::numeric_limits<double>::infinity(), {}};
    const MaskSpec mask_spec{direction, ratio, mode};
    for (const VectorMap& frame : maps.frames) {
      auto it = by_frame.find(frame.frame_id);
      if (it == by_frame.end()) {
        throw InvalidArgument("no reference path for frame '" +
                              frame.frame_id + "'");
      }
      VectorMap m = frame;
      m.roi = maps.roi;
      const double s =
          score_reference_path(directional_mask(m, mask_spec), *it->second, params);
      pt.frame_scores.push_back(s);
      pt.mean_score += s;
      pt.min_score = std::min(pt.min_score, s);
      pt.max_score = std::max(pt.max_score, s);
    }
    pt.mean_score /= static_cast<double>(maps.frames.size());
    curve.push_back(std::move(pt));
  }
  return curve;
}

}  // namespace ahead
