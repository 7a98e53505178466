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

// Deterministic synthetic road scenes and a direction-biased prediction
// noise model.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ahead/errors.hpp"
#include "ahead/geometry.hpp"
#include "ahead/metrics.hpp"
#include "ahead/parallel.hpp"
#include "ahead/proxy.hpp"
#include "ahead/distill.hpp"

namespace ahead {

template <class T>
struct Range {
  T lo;
  T hi;

  bool valid() const { return lo <= hi; }
};

struct SceneConfig {
  std::uint64_t seed = 0;
  std::size_t num_frames = 10;
  Range<int> lanes_per_frame{2, 4};
  Range<int> crossings_per_frame{0, 2};
  // Number of carriageways; each contributes one pair of road boundaries.
  Range<int> boundary_pairs{1, 2};
  Range<double> curvature_range{-0.01, 0.01};
  Roi roi;
  double lane_width = 3.5;
  double median_width = 3.0;
  double vertex_spacing = 2.0;
  double crossing_depth = 4.0;

  void validate() const {
    roi.validate();
    if (num_frames < 1) throw InvalidArgument("num_frames must be >= 1");
    if (!lanes_per_frame.valid() || !crossings_per_frame.valid() ||
        !boundary_pairs.valid() || !curvature_range.valid()) {
      throw InvalidArgument("scene config ranges must be non-empty");
    }
    if (boundary_pairs.lo < 1) {
      throw InvalidArgument("at least one boundary pair is required");
    }
    if (crossings_per_frame.lo < 0) {
      throw InvalidArgument("crossing counts must be >= 0");
    }
    if (lanes_per_frame.lo < boundary_pairs.hi) {
      throw InvalidArgument("every carriageway needs at least one lane");
    }
    if (!(lane_width > 0.0) || !(vertex_spacing > 0.0) ||
        !(median_width >= 0.0) || !(crossing_depth > 0.0)) {
      throw InvalidArgument("scene dimensions must be positive");
    }
  }
};

struct NoiseModel {
  double jitter_sigma = 0.0;
  double dropout_prob = 0.0;
  double spurious_rate = 0.0;
  double confidence_noise = 0.0;
  // Multiplier on jitter_sigma and dropout_prob for geometry behind the ego.
  double rear_noise_scale = 1.0;

  void validate() const {
    if (!(jitter_sigma >= 0.0) || !(spurious_rate >= 0.0)) {
      throw InvalidArgument("noise magnitudes must be >= 0");
    }
    if (!(dropout_prob >= 0.0 && dropout_prob <= 1.0) ||
        !(confidence_noise >= 0.0 && confidence_noise <= 1.0)) {
      throw InvalidArgument("noise probabilities must lie in [0, 1]");
    }
    if (!(rear_noise_scale > 0.0)) {
      throw InvalidArgument("rear_noise_scale must be > 0");
    }
  }
};

// Named presets for the CLI.
inline std::optional<NoiseModel> noise_preset(std::string_view name) {
  if (name == "none") return NoiseModel{};
  if (name == "balanced") return NoiseModel{0.8, 0.1, 1.0, 0.05, 1.0};
  if (name == "rear_biased") return NoiseModel{0.8, 0.1, 1.0, 0.05, 0.2};
  if (name == "heavy") return NoiseModel{2.0, 0.2, 2.0, 0.1, 1.0};
  return std::nullopt;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, index, purpose).
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index,
                              std::uint64_t purpose) {
  return std::mt19937_64(
      splitmix64(splitmix64(seed ^ (purpose * 0xd1b54a32d192ed03ULL)) + index));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  // Built from raw bits so the stream is identical across standard libraries.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(rng() % span);
}

// Box-Muller on raw bits; one draw per call.
inline double normal(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

inline int poisson(std::mt19937_64& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  // Knuth's product method; means here are small.
  const double limit = std::exp(-mean);
  int k = 0;
  double prod = uniform(rng, 0.0, 1.0);
  while (prod > limit) {
    ++k;
    prod *= uniform(rng, 0.0, 1.0);
  }
  return k;
}

// Lateral position at longitudinal offset y of the curve that passes
// through (d, 0) and is concentric with the ego reference arc of curvature
// kappa (x(0) = 0).
inline double offset_curve_x(double kappa, double d, double y) {
  if (std::abs(kappa) < 1e-9) return d;
  const double big_r = 1.0 / kappa;
  const double r = big_r - d;
  return big_r - std::copysign(std::sqrt(r * r - y * y), r);
}

struct FrameLayout {
  double curvature = 0.0;
  // Lateral offsets (at y = 0) of every line, left to right, with its class.
  std::vector<std::pair<double, MapClass>> lines;
  // Carriageway extents (left, right) at y = 0.
  std::vector<std::pair<double, double>> carriageways;
  struct Crossing {
    std::size_t carriageway;
    double y0;
  };
  std::vector<Crossing> crossings;
};

inline FrameLayout make_layout(const SceneConfig& cfg, std::size_t frame) {
  auto rng = stream(cfg.seed, frame, 1);
  FrameLayout layout;
  layout.curvature =
      uniform(rng, cfg.curvature_range.lo, cfg.curvature_range.hi);
  const int pairs = uniform_int(rng, cfg.boundary_pairs.lo, cfg.boundary_pairs.hi);
  const int lanes = std::max(
      pairs, uniform_int(rng, cfg.lanes_per_frame.lo, cfg.lanes_per_frame.hi));
  std::vector<int> per_carriageway(static_cast<std::size_t>(pairs), 1);
  for (int extra = lanes - pairs, k = 0; extra > 0; --extra, ++k) {
    ++per_carriageway[static_cast<std::size_t>(k % pairs)];
  }
  // Ego lane: pick one lane and put its centre at x = 0.
  const int ego_lane = uniform_int(rng, 0, lanes - 1);
  double left = 0.0;
  int lane_index = 0;
  double ego_center = 0.0;
  std::vector<std::pair<double, double>> spans;
  for (int c = 0; c < pairs; ++c) {
    const double start = left;
    for (int l = 0; l < per_carriageway[static_cast<std::size_t>(c)]; ++l) {
      if (lane_index == ego_lane) ego_center = left + 0.5 * cfg.lane_width;
      left += cfg.lane_width;
      ++lane_index;
    }
    spans.emplace_back(start, left);
    left += cfg.median_width;
  }
  for (std::size_t c = 0; c < spans.size(); ++c) {
    const double a = spans[c].first - ego_center;
    const double b = spans[c].second - ego_center;
    layout.carriageways.emplace_back(a, b);
    layout.lines.emplace_back(a, MapClass::kRoadBoundary);
    const int n = per_carriageway[c];
    for (int l = 1; l < n; ++l) {
      layout.lines.emplace_back(a + l * cfg.lane_width, MapClass::kLaneDivider);
    }
    layout.lines.emplace_back(b, MapClass::kRoadBoundary);
  }
  const double big_r = std::abs(layout.curvature) < 1e-9
                           ? std::numeric_limits<double>::infinity()
                           : std::abs(1.0 / layout.curvature);
  for (const auto& line : layout.lines) {
    if (big_r - std::abs(line.first) <= cfg.roi.longitudinal_extent + 1.0) {
      throw InvalidArgument("curvature too high for the ROI and road width");
    }
  }
  const int crossings =
      uniform_int(rng, cfg.crossings_per_frame.lo, cfg.crossings_per_frame.hi);
  const double reach = cfg.roi.longitudinal_extent - cfg.crossing_depth;
  for (int k = 0; k < crossings; ++k) {
    const auto c = static_cast<std::size_t>(uniform_int(rng, 0, pairs - 1));
    layout.crossings.push_back({c, uniform(rng, -reach, reach - cfg.crossing_depth)});
  }
  return layout;
}

inline void append_edge(std::vector<Point2>& pts, Point2 to, double spacing) {
  const Point2 from = pts.back();
  const double len = distance(from, to);
  const int pieces = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  for (int i = 1; i <= pieces; ++i) {
    const double t = static_cast<double>(i) / pieces;
    pts.push_back({from.x + t * (to.x - from.x), from.y + t * (to.y - from.y)});
  }
}

inline void add_clipped(VectorMap& map, MapClass cls, std::vector<Point2> pts,
                        const Roi& roi) {
  for (auto& piece : clip_to_roi(Polyline(std::move(pts)), roi)) {
    map.instances.push_back({cls, std::move(piece), std::nullopt});
  }
}

inline std::string frame_name(std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu", frame);
  return buf;
}

}  // namespace detail

inline VectorMap generate_frame(const SceneConfig& cfg, std::size_t frame) {
  const detail::FrameLayout layout = detail::make_layout(cfg, frame);
  const double extent = cfg.roi.longitudinal_extent;
  const int segments = std::max(
      1, static_cast<int>(std::ceil(2.0 * extent / cfg.vertex_spacing)));

  VectorMap map{detail::frame_name(frame), {}, cfg.roi};
  for (const auto& [offset, cls] : layout.lines) {
    std::vector<Point2> pts;
    for (int k = 0; k <= segments; ++k) {
      const double y = -extent + 2.0 * extent * k / segments;
      pts.push_back({detail::offset_curve_x(layout.curvature, offset, y), y});
    }
    detail::add_clipped(map, cls, std::move(pts), cfg.roi);
  }
  for (const auto& crossing : layout.crossings) {
    const auto [left, right] = layout.carriageways[crossing.carriageway];
    const double y0 = crossing.y0;
    const double y1 = y0 + cfg.crossing_depth;
    const double k = layout.curvature;
    std::vector<Point2> pts{{detail::offset_curve_x(k, left, y0), y0}};
    detail::append_edge(pts, {detail::offset_curve_x(k, right, y0), y0},
                        cfg.vertex_spacing);
    detail::append_edge(pts, {detail::offset_curve_x(k, right, y1), y1},
                        cfg.vertex_spacing);
    detail::append_edge(pts, {detail::offset_curve_x(k, left, y1), y1},
                        cfg.vertex_spacing);
    detail::append_edge(pts, pts.front(), cfg.vertex_spacing);
    detail::add_clipped(map, MapClass::kPedestrianCrossing, std::move(pts),
                        cfg.roi);
  }
  return map;
}

inline Dataset generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Dataset out{cfg.roi, std::vector<VectorMap>(cfg.num_frames)};
  parallel_for(cfg.num_frames, resolve_thread_count(),
               [&](std::size_t i) { out.frames[i] = generate_frame(cfg, i); });
  return out;
}

// Centreline of the ego lane from y = 0 to the horizon, one sample per
// `spacing` meters.
inline std::vector<ReferencePath> generate_reference_paths(
    const SceneConfig& cfg, double horizon = -1.0, double spacing = 1.0) {
  cfg.validate();
  if (horizon < 0.0) horizon = cfg.roi.longitudinal_extent;
  if (!(spacing > 0.0)) throw InvalidArgument("path spacing must be > 0");
  std::vector<ReferencePath> paths;
  for (std::size_t f = 0; f < cfg.num_frames; ++f) {
    const auto layout = detail::make_layout(cfg, f);
    ReferencePath path{detail::frame_name(f), {}, horizon};
    const int n = static_cast<int>(std::floor(horizon / spacing + 1e-9));
    for (int k = 0; k <= n; ++k) {
      const double y = k * spacing;
      path.points.push_back({detail::offset_curve_x(layout.curvature, 0.0, y), y});
    }
    paths.push_back(std::move(path));
  }
  return paths;
}

// ---------------------------------------------------------------------------
// Prediction noise

// Chamfer scale that maps to zero confidence.
inline constexpr double kConfidenceChamferScale = 1.5;

// Jittered, thinned and polluted copy of `gt`. Every instance consumes the
// same number of random draws regardless of outcome, so two noise models
// that differ only in magnitudes see the same underlying randomness.
inline VectorMap perturb(const VectorMap& gt, const NoiseModel& nm,
                         std::uint64_t seed) {
  nm.validate();
  auto rng = detail::stream(seed, 0, 2);
  VectorMap out{gt.frame_id, {}, gt.roi};
  const double rho = nm.rear_noise_scale;

  for (const MapInstance& inst : gt.instances) {
    const double drop_draw = detail::uniform(rng, 0.0, 1.0);
    std::vector<Point2> pts;
    for (const Point2& v : inst.geometry.points()) {
      const double scale = v.y < 0.0 ? rho : 1.0;
      const double nx = detail::normal(rng);
      const double ny = detail::normal(rng);
      pts.push_back({v.x + nm.jitter_sigma * scale * nx,
                     v.y + nm.jitter_sigma * scale * ny});
    }
    const double conf_draw = detail::normal(rng);

    const double mid_scale = arc_midpoint(inst.geometry).y < 0.0 ? rho : 1.0;
    if (drop_draw < std::min(1.0, nm.dropout_prob * mid_scale)) continue;

    std::optional<Polyline> geometry;
    try {
      geometry.emplace(std::move(pts));
    } catch (const InvalidGeometry&) {
      geometry.emplace(inst.geometry);
    }
    const double err = chamfer_symmetric(resample_points(*geometry, 50),
                                         resample_points(inst.geometry, 50));
    const double conf = std::clamp(
        1.0 - err / kConfidenceChamferScale + nm.confidence_noise * conf_draw,
        0.0, 1.0);
    out.instances.push_back({inst.cls, std::move(*geometry), conf});
  }

  const int spurious = detail::poisson(rng, nm.spurious_rate);
  const Roi& roi = gt.roi;
  for (int k = 0; k < spurious; ++k) {
    const auto cls = kAllClasses[static_cast<std::size_t>(
        detail::uniform_int(rng, 0, static_cast<int>(kNumClasses) - 1))];
    const Point2 start{detail::uniform(rng, -roi.lateral_extent, roi.lateral_extent),
                       detail::uniform(rng, -roi.longitudinal_extent,
                                       roi.longitudinal_extent)};
    const double heading = detail::uniform(rng, -std::numbers::pi, std::numbers::pi);
    const double bend = detail::uniform(rng, -0.3, 0.3);
    const double len = detail::uniform(rng, 2.0, 8.0);
    const double conf = detail::uniform(rng, 0.0, 0.3);
    const Point2 mid{start.x + 0.5 * len * std::cos(heading),
                     start.y + 0.5 * len * std::sin(heading)};
    const Point2 end{mid.x + 0.5 * len * std::cos(heading + bend),
                     mid.y + 0.5 * len * std::sin(heading + bend)};
    out.instances.push_back({cls, Polyline({start, mid, end}), conf});
  }
  return out;
}

inline Dataset perturb_dataset(const Dataset& gt, const NoiseModel& nm,
                               std::uint64_t seed) {
  Dataset out{gt.roi, std::vector<VectorMap>(gt.frames.size())};
  parallel_for(gt.frames.size(), resolve_thread_count(), [&](std::size_t i) {
    VectorMap frame = gt.frames[i];
    frame.roi = gt.roi;
    out.frames[i] = perturb(frame, nm, detail::splitmix64(seed) + i);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Ground-truth rasterization

// One-cell-thick rasterization of every instance onto an H x W grid over
// the ROI. Row 0 is the far front edge (y = +L); column 0 is x = -lateral.
inline BinaryMask rasterize_mask(const VectorMap& m, std::size_t height,
                                 std::size_t width) {
  BinaryMask mask(height, width);
  const Roi& roi = m.roi;
  auto cell = [&](Point2 p) {
    const double fi = (roi.longitudinal_extent - p.y) /
                      (2.0 * roi.longitudinal_extent) * static_cast<double>(height);
    const double fj = (p.x + roi.lateral_extent) / (2.0 * roi.lateral_extent) *
                      static_cast<double>(width);
    const auto clampi = [](double v, std::size_t n) {
      return static_cast<long>(std::clamp(std::floor(v), 0.0,
                                          static_cast<double>(n - 1)));
    };
    return std::pair<long, long>{clampi(fi, height), clampi(fj, width)};
  };
  for (const MapInstance& inst : m.instances) {
    const auto pts = inst.geometry.points();
    for (std::size_t k = 1; k < pts.size(); ++k) {
      auto [i0, j0] = cell(pts[k - 1]);
      const auto [i1, j1] = cell(pts[k]);
      const long di = std::abs(i1 - i0), dj = std::abs(j1 - j0);
      const long si = i0 < i1 ? 1 : -1, sj = j0 < j1 ? 1 : -1;
      long err = dj - di;
      while (true) {
        mask.set(static_cast<std::size_t>(i0), static_cast<std::size_t>(j0), true);
        if (i0 == i1 && j0 == j1) break;
        const long e2 = 2 * err;
        if (e2 > -di) {
          err -= di;
          j0 += sj;
        }
        if (e2 < dj) {
          err += dj;
          i0 += si;
        }
      }
    }
  }
  return mask;
}

}  // namespace ahead
