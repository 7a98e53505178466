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

// Vector-map evaluation: Chamfer matching, TP/FP assignment, precision /
// recall, all-point AP, and global / forward / rear aggregation.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <initializer_list>
#include <optional>
#include <ranges>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ahead/errors.hpp"
#include "ahead/geometry.hpp"
#include "ahead/parallel.hpp"

namespace ahead {

enum class MapClass { kPedestrianCrossing = 0, kLaneDivider = 1, kRoadBoundary = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<MapClass, kNumClasses> kAllClasses = {
    MapClass::kPedestrianCrossing, MapClass::kLaneDivider,
    MapClass::kRoadBoundary};

inline std::string_view to_string(MapClass c) {
  switch (c) {
    case MapClass::kPedestrianCrossing:
      return "pedestrian_crossing";
    case MapClass::kLaneDivider:
      return "lane_divider";
    case MapClass::kRoadBoundary:
      return "road_boundary";
  }
  return "unknown";
}

inline std::optional<MapClass> parse_map_class(std::string_view name) {
  for (MapClass c : kAllClasses) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

inline std::size_t index_of(MapClass c) { return static_cast<std::size_t>(c); }

struct MapInstance {
  MapClass cls;
  Polyline geometry;
  // Present on predictions, absent on ground truth.
  std::optional<double> confidence;

  friend bool operator==(const MapInstance&, const MapInstance&) = default;
};

struct VectorMap {
  std::string frame_id;
  std::vector<MapInstance> instances;
  Roi roi;

  friend bool operator==(const VectorMap&, const VectorMap&) = default;
};

struct Dataset {
  Roi roi;
  std::vector<VectorMap> frames;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

enum class RegionSplit { kClip, kCentroid };

inline std::string_view to_string(RegionSplit s) {
  return s == RegionSplit::kClip ? "clip" : "centroid";
}

inline std::optional<RegionSplit> parse_region_split(std::string_view name) {
  if (name == "clip") return RegionSplit::kClip;
  if (name == "centroid") return RegionSplit::kCentroid;
  return std::nullopt;
}

struct EvalConfig {
  std::vector<double> chamfer_thresholds{0.5, 1.0, 1.5};
  std::size_t resample_points = 100;
  // When > 0, instances are resampled at this arc spacing instead of a
  // fixed count.
  double resample_spacing = 0.0;
  RegionSplit region_split = RegionSplit::kClip;
  double min_fragment_len = kDefaultMinFragmentLength;
  // 0 = AMAP_EVAL_THREADS or hardware concurrency.
  unsigned threads = 0;

  void validate() const {
    if (chamfer_thresholds.empty()) {
      throw InvalidArgument("at least one chamfer threshold is required");
    }
    for (std::size_t i = 0; i < chamfer_thresholds.size(); ++i) {
      const double t = chamfer_thresholds[i];
      if (!(t > 0.0) || !std::isfinite(t)) {
        throw InvalidArgument("chamfer thresholds must be positive");
      }
      if (i > 0 && !(t > chamfer_thresholds[i - 1])) {
        throw InvalidArgument("chamfer thresholds must be strictly increasing");
      }
    }
    if (resample_points < 2) {
      throw InvalidArgument("resample_points must be >= 2");
    }
    if (resample_spacing < 0.0 || !std::isfinite(resample_spacing)) {
      throw InvalidArgument("resample_spacing must be >= 0");
    }
    if (!(min_fragment_len >= 0.0)) {
      throw InvalidArgument("min_fragment_len must be >= 0");
    }
  }

  std::vector<Point2> resample(const Polyline& p) const {
    const std::size_t n = resample_spacing > 0.0
                              ? count_for_spacing(p, resample_spacing)
                              : resample_points;
    return ahead::resample_points(p, n);
  }
};

// ---------------------------------------------------------------------------
// Matching

struct MatchResult {
  // Per prediction, in input order.
  std::vector<bool> is_tp;
  std::vector<std::optional<std::size_t>> matched_gt;
  // Per ground truth: the prediction that consumed it.
  std::vector<std::optional<std::size_t>> consumed_by;
};

// Predictions in descending confidence (stable on ties); each takes the
// nearest unconsumed GT within `threshold`. `distances` is row-major
// preds x gts; +inf marks pairs known to be beyond every threshold.
inline MatchResult match_from_distances(std::span<const double> confidences,
                                        std::size_t num_gt,
                                        std::span<const double> distances,
                                        double threshold) {
  const std::size_t num_pred = confidences.size();
  MatchResult result;
  result.is_tp.assign(num_pred, false);
  result.matched_gt.assign(num_pred, std::nullopt);
  result.consumed_by.assign(num_gt, std::nullopt);

  std::vector<std::size_t> order(num_pred);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return confidences[a] > confidences[b];
                   });
  for (std::size_t p : order) {
    std::optional<std::size_t> best;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < num_gt; ++g) {
      if (result.consumed_by[g]) continue;
      const double d = distances[p * num_gt + g];
      if (d <= threshold && d < best_dist) {
        best_dist = d;
        best = g;
      }
    }
    if (best) {
      result.is_tp[p] = true;
      result.matched_gt[p] = best;
      result.consumed_by[*best] = p;
    }
  }
  return result;
}

namespace detail {

inline void require_confidence(const MapInstance& inst) {
  if (!inst.confidence) {
    throw InvalidArgument("prediction without confidence");
  }
  const double c = *inst.confidence;
  if (!(c >= 0.0 && c <= 1.0)) {
    throw InvalidArgument("confidence outside [0, 1]");
  }
}

inline std::vector<double> chamfer_table(
    const std::vector<std::vector<Point2>>& preds,
    const std::vector<std::vector<Point2>>& gts, double bound) {
  std::vector<double> table(preds.size() * gts.size());
  for (std::size_t p = 0; p < preds.size(); ++p) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      table[p * gts.size() + g] = chamfer_bounded(preds[p], gts[g], bound);
    }
  }
  return table;
}

}  // namespace detail

inline MatchResult match_instances(std::span<const MapInstance> preds,
                                   std::span<const MapInstance> gts,
                                   double threshold, const EvalConfig& cfg) {
  if (preds.empty() && gts.empty()) return {};
  const MapClass cls = preds.empty() ? gts.front().cls : preds.front().cls;
  std::vector<double> confidences;
  std::vector<std::vector<Point2>> pred_pts, gt_pts;
  for (const auto& p : preds) {
    detail::require_confidence(p);
    if (p.cls != cls) throw InvalidArgument("mixed classes in match_instances");
    confidences.push_back(*p.confidence);
    pred_pts.push_back(cfg.resample(p.geometry));
  }
  for (const auto& g : gts) {
    if (g.cls != cls) throw InvalidArgument("mixed classes in match_instances");
    gt_pts.push_back(cfg.resample(g.geometry));
  }
  const auto table = detail::chamfer_table(pred_pts, gt_pts, threshold);
  return match_from_distances(confidences, gts.size(), table, threshold);
}

// ---------------------------------------------------------------------------
// Average precision

// All-point interpolated AP over a ranked TP/FP list (any range of values
// convertible to bool). NaN when there is nothing to score: no ground truth
// and no predictions.
template <std::ranges::input_range Flags>
double average_precision(const Flags& ranked_tp, std::size_t num_gt) {
  std::vector<char> tp_flags;
  for (auto&& f : ranked_tp) tp_flags.push_back(static_cast<bool>(f) ? 1 : 0);
  if (num_gt == 0) {
    return tp_flags.empty() ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  }
  const std::size_t n = tp_flags.size();
  std::vector<double> precision(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (tp_flags[k]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
  }
  for (std::size_t k = n; k-- > 1;) {
    precision[k - 1] = std::max(precision[k - 1], precision[k]);
  }
  double ap = 0.0;
  const double step = 1.0 / static_cast<double>(num_gt);
  for (std::size_t k = 0; k < n; ++k) {
    if (tp_flags[k]) ap += step * precision[k];
  }
  return std::min(ap, 1.0);
}

inline double average_precision(std::initializer_list<bool> ranked_tp,
                                std::size_t num_gt) {
  return average_precision(std::vector<bool>(ranked_tp), num_gt);
}

// ---------------------------------------------------------------------------
// Regions

enum class Region { kGlobal = 0, kForward = 1, kRear = 2 };
inline constexpr std::size_t kNumRegions = 3;
inline constexpr std::array<Region, kNumRegions> kAllRegions = {
    Region::kGlobal, Region::kForward, Region::kRear};

inline std::string_view to_string(Region r) {
  switch (r) {
    case Region::kGlobal:
      return "global";
    case Region::kForward:
      return "forward";
    case Region::kRear:
      return "rear";
  }
  return "unknown";
}

// Point at half the arc length.
inline Point2 arc_midpoint(const Polyline& p) {
  const double half = 0.5 * p.length();
  double walked = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double seg = distance(p[i - 1], p[i]);
    if (walked + seg >= half) {
      const double t = seg > 0.0 ? (half - walked) / seg : 0.0;
      return {p[i - 1].x + t * (p[i].x - p[i - 1].x),
              p[i - 1].y + t * (p[i].y - p[i - 1].y)};
    }
    walked += seg;
  }
  return p.back();
}

// Forward half is y >= 0, rear half is y <= 0.
inline std::pair<VectorMap, VectorMap> split_regions(const VectorMap& m,
                                                     const EvalConfig& cfg) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  VectorMap forward{m.frame_id, {}, m.roi};
  VectorMap rear{m.frame_id, {}, m.roi};
  for (const MapInstance& inst : m.instances) {
    if (cfg.region_split == RegionSplit::kCentroid) {
      (arc_midpoint(inst.geometry).y >= 0.0 ? forward : rear)
          .instances.push_back(inst);
      continue;
    }
    for (auto& piece : clip_to_band(inst.geometry, Axis::kLongitudinal, 0.0,
                                    kInf, Keep::kInside,
                                    cfg.min_fragment_len)) {
      forward.instances.push_back({inst.cls, std::move(piece), inst.confidence});
    }
    for (auto& piece : clip_to_band(inst.geometry, Axis::kLongitudinal, -kInf,
                                    0.0, Keep::kInside,
                                    cfg.min_fragment_len)) {
      rear.instances.push_back({inst.cls, std::move(piece), inst.confidence});
    }
  }
  return {std::move(forward), std::move(rear)};
}

// Clips every instance to `roi`; pieces inherit class and confidence.
inline VectorMap clip_map_to_roi(const VectorMap& m, const Roi& roi,
                                 double min_fragment_len) {
  VectorMap out{m.frame_id, {}, roi};
  for (const MapInstance& inst : m.instances) {
    for (auto& piece : clip_to_roi(inst.geometry, roi, min_fragment_len)) {
      out.instances.push_back({inst.cls, std::move(piece), inst.confidence});
    }
  }
  return out;
}

// Reflection y -> -y (forward and rear swap).
inline VectorMap mirror_longitudinal(const VectorMap& m) {
  VectorMap out{m.frame_id, {}, m.roi};
  for (const MapInstance& inst : m.instances) {
    std::vector<Point2> pts(inst.geometry.points().begin(),
                            inst.geometry.points().end());
    for (auto& p : pts) p.y = -p.y;
    out.instances.push_back({inst.cls, Polyline(std::move(pts)), inst.confidence});
  }
  return out;
}

inline Dataset mirror_longitudinal(const Dataset& d) {
  Dataset out{d.roi, {}};
  for (const auto& f : d.frames) out.frames.push_back(mirror_longitudinal(f));
  return out;
}

// ---------------------------------------------------------------------------
// Report

struct PrPoint {
  double confidence;
  bool tp;
  double precision;
  double recall;
};

struct ClassResult {
  // One AP per threshold (NaN when excluded).
  std::vector<double> ap_per_threshold;
  // Mean over thresholds; NaN when the class has neither GT nor predictions.
  double ap = std::numeric_limits<double>::quiet_NaN();
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
  // Ranked precision / recall points per threshold.
  std::vector<std::vector<PrPoint>> pr_curves;

  bool excluded() const { return std::isnan(ap); }
};

struct RegionResult {
  std::array<ClassResult, kNumClasses> classes;
  // Mean of the non-excluded class APs; NaN if every class is excluded.
  double map = std::numeric_limits<double>::quiet_NaN();
};

struct EvalReport {
  EvalConfig config;
  std::array<RegionResult, kNumRegions> regions;

  const RegionResult& region(Region r) const {
    return regions[static_cast<std::size_t>(r)];
  }
  const ClassResult& result(Region r, MapClass c) const {
    return region(r).classes[index_of(c)];
  }
  double map() const { return region(Region::kGlobal).map; }
  double a_map() const { return region(Region::kForward).map; }
  double r_map() const { return region(Region::kRear).map; }
};

namespace detail {

inline double mean_ignoring_nan(std::span<const double> values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    if (std::isnan(v)) continue;
    sum += v;
    ++count;
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN()
                    : sum / static_cast<double>(count);
}

// Matching outcome of one (frame, region, class).
struct FrameClassMatches {
  std::size_t num_gt = 0;
  std::vector<double> confidences;
  // tp[threshold][pred]
  std::vector<std::vector<char>> tp;
};

using FrameMatches =
    std::array<std::array<FrameClassMatches, kNumClasses>, kNumRegions>;

inline FrameMatches match_frame(const VectorMap& pred, const VectorMap& gt,
                                const EvalConfig& cfg) {
  const Roi& roi = gt.roi;
  const VectorMap pred_roi = clip_map_to_roi(pred, roi, cfg.min_fragment_len);
  const VectorMap gt_roi = clip_map_to_roi(gt, roi, cfg.min_fragment_len);
  auto [pred_fwd, pred_rear] = split_regions(pred_roi, cfg);
  auto [gt_fwd, gt_rear] = split_regions(gt_roi, cfg);
  const std::array<const VectorMap*, kNumRegions> pred_maps = {
      &pred_roi, &pred_fwd, &pred_rear};
  const std::array<const VectorMap*, kNumRegions> gt_maps = {&gt_roi, &gt_fwd,
                                                             &gt_rear};
  const double bound = cfg.chamfer_thresholds.back();

  FrameMatches out;
  for (std::size_t r = 0; r < kNumRegions; ++r) {
    std::array<std::vector<std::vector<Point2>>, kNumClasses> pred_pts, gt_pts;
    for (const auto& inst : pred_maps[r]->instances) {
      const std::size_t c = index_of(inst.cls);
      out[r][c].confidences.push_back(*inst.confidence);
      pred_pts[c].push_back(cfg.resample(inst.geometry));
    }
    for (const auto& inst : gt_maps[r]->instances) {
      gt_pts[index_of(inst.cls)].push_back(cfg.resample(inst.geometry));
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      FrameClassMatches& fc = out[r][c];
      fc.num_gt = gt_pts[c].size();
      const auto table = chamfer_table(pred_pts[c], gt_pts[c], bound);
      for (double threshold : cfg.chamfer_thresholds) {
        const MatchResult m =
            match_from_distances(fc.confidences, fc.num_gt, table, threshold);
        fc.tp.emplace_back(m.is_tp.begin(), m.is_tp.end());
      }
    }
  }
  return out;
}

}  // namespace detail

// Pools matches across all frames (ranked dataset-wide by confidence, ties
// by frame order then instance order) and computes AP for every region,
// class and threshold.
inline EvalReport evaluate(const Dataset& preds, const Dataset& gts,
                           const EvalConfig& cfg) {
  cfg.validate();
  gts.roi.validate();

  std::map<std::string, std::size_t> pred_index;
  for (std::size_t i = 0; i < preds.frames.size(); ++i) {
    if (!pred_index.emplace(preds.frames[i].frame_id, i).second) {
      throw InvalidArgument("duplicate prediction frame_id '" +
                            preds.frames[i].frame_id + "'");
    }
  }
  std::set<std::string> gt_ids;
  std::vector<std::string> missing_in_pred, missing_in_gt;
  for (const auto& f : gts.frames) {
    if (!gt_ids.insert(f.frame_id).second) {
      throw InvalidArgument("duplicate ground-truth frame_id '" + f.frame_id +
                            "'");
    }
    if (!pred_index.count(f.frame_id)) missing_in_pred.push_back(f.frame_id);
  }
  for (const auto& f : preds.frames) {
    if (!gt_ids.count(f.frame_id)) missing_in_gt.push_back(f.frame_id);
  }
  if (!missing_in_pred.empty() || !missing_in_gt.empty()) {
    throw FrameMismatch(std::move(missing_in_pred), std::move(missing_in_gt));
  }
  for (const auto& f : preds.frames) {
    for (const auto& inst : f.instances) detail::require_confidence(inst);
  }

  const std::size_t num_frames = gts.frames.size();
  std::vector<detail::FrameMatches> per_frame(num_frames);
  parallel_for(num_frames, resolve_thread_count(cfg.threads),
               [&](std::size_t i) {
                 VectorMap gt = gts.frames[i];
                 gt.roi = gts.roi;
                 const VectorMap& pred =
                     preds.frames[pred_index.at(gt.frame_id)];
                 per_frame[i] = detail::match_frame(pred, gt, cfg);
               });

  EvalReport report;
  report.config = cfg;
  const std::size_t num_thresholds = cfg.chamfer_thresholds.size();
  struct Ranked {
    double confidence;
    std::size_t frame;
    std::size_t index;
  };
  for (std::size_t r = 0; r < kNumRegions; ++r) {
    RegionResult& region = report.regions[r];
    std::array<double, kNumClasses> class_aps{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      ClassResult& cr = region.classes[c];
      std::vector<Ranked> ranked;
      for (std::size_t f = 0; f < num_frames; ++f) {
        const auto& fc = per_frame[f][r][c];
        cr.num_gt += fc.num_gt;
        for (std::size_t k = 0; k < fc.confidences.size(); ++k) {
          ranked.push_back({fc.confidences[k], f, k});
        }
      }
      cr.num_pred = ranked.size();
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const Ranked& a, const Ranked& b) {
                         return a.confidence > b.confidence;
                       });
      for (std::size_t t = 0; t < num_thresholds; ++t) {
        std::vector<char> flags(ranked.size());
        for (std::size_t k = 0; k < ranked.size(); ++k) {
          flags[k] = per_frame[ranked[k].frame][r][c].tp[t][ranked[k].index];
        }
        cr.ap_per_threshold.push_back(average_precision(flags, cr.num_gt));

        std::vector<PrPoint> curve;
        curve.reserve(ranked.size());
        std::size_t tp = 0;
        for (std::size_t k = 0; k < ranked.size(); ++k) {
          if (flags[k]) ++tp;
          curve.push_back(
              {ranked[k].confidence, flags[k] != 0,
               static_cast<double>(tp) / static_cast<double>(k + 1),
               cr.num_gt == 0 ? 0.0
                              : static_cast<double>(tp) /
                                    static_cast<double>(cr.num_gt)});
        }
        cr.pr_curves.push_back(std::move(curve));
      }
      cr.ap = detail::mean_ignoring_nan(cr.ap_per_threshold);
      class_aps[c] = cr.ap;
    }
    region.map = detail::mean_ignoring_nan(class_aps);
  }
  return report;
}

}  // namespace ahead
