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

// File formats: JSON datasets and reference paths, flat TOML configuration,
// JSON / CSV / text reports.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "ahead/distill.hpp"
#include "ahead/errors.hpp"
#include "ahead/metrics.hpp"
#include "ahead/proxy.hpp"

namespace ahead {

inline constexpr std::string_view kToolName = "aheadeval";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kFormatVersion = "1";

using Json = nlohmann::ordered_json;

// Fixed six-decimal rendering used by every report. glibc rounds the exact
// binary value, with ties to even.
inline std::string fmt6(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path,
                            std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InvalidArgument("write failed for '" + path.string() + "'");
}

namespace detail {

inline Json parse_json_text(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, column = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw SchemaError("", "JSON parse error at line " + std::to_string(line) +
                              ", column " + std::to_string(column) + ": " +
                              e.what());
  }
}

inline const Json& member(const Json& obj, const std::string& key,
                          const std::string& ptr) {
  if (!obj.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw SchemaError(ptr + "/" + key, "missing required member");
  }
  return *it;
}

inline double number(const Json& v, const std::string& ptr) {
  if (!v.is_number()) throw SchemaError(ptr, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw SchemaError(ptr, "expected a finite number");
  return d;
}

inline std::string string_value(const Json& v, const std::string& ptr) {
  if (!v.is_string()) throw SchemaError(ptr, "expected a string");
  return v.get<std::string>();
}

inline void check_format_version(const Json& doc) {
  const std::string v =
      string_value(member(doc, "format_version", ""), "/format_version");
  if (v != kFormatVersion) {
    throw SchemaError("/format_version",
                      "unsupported format_version '" + v + "'");
  }
}

inline std::vector<Point2> parse_points(const Json& v, const std::string& ptr) {
  if (!v.is_array()) throw SchemaError(ptr, "expected an array of [x, y]");
  if (v.size() < 2) throw SchemaError(ptr, "need at least 2 points");
  std::vector<Point2> pts;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = ptr + "/" + std::to_string(i);
    if (!v[i].is_array() || v[i].size() != 2) {
      throw SchemaError(p, "expected [x, y]");
    }
    pts.push_back({number(v[i][0], p + "/0"), number(v[i][1], p + "/1")});
  }
  return pts;
}

inline Json points_json(std::span<const Point2> pts) {
  Json arr = Json::array();
  for (const Point2& p : pts) arr.push_back(Json::array({p.x, p.y}));
  return arr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Datasets

enum class DatasetRole { kGroundTruth, kPrediction, kAny };

inline Dataset dataset_from_json(const Json& doc, DatasetRole role) {
  using detail::member;
  detail::check_format_version(doc);
  Dataset d;
  const Json& roi = member(doc, "roi", "");
  d.roi.lateral_extent = detail::number(member(roi, "lateral", "/roi"), "/roi/lateral");
  d.roi.longitudinal_extent =
      detail::number(member(roi, "longitudinal", "/roi"), "/roi/longitudinal");
  if (!(d.roi.lateral_extent > 0.0) || !(d.roi.longitudinal_extent > 0.0)) {
    throw SchemaError("/roi", "ROI extents must be positive");
  }

  const Json& frames = member(doc, "frames", "");
  if (!frames.is_array()) throw SchemaError("/frames", "expected an array");
  // Confidence is all-or-none within a file. Predictions require it;
  // ground truth may carry it (so one file can serve as both) but it is
  // dropped on load.
  std::optional<bool> with_confidence;
  if (role == DatasetRole::kPrediction) with_confidence = true;
  std::set<std::string> seen_ids;

  for (std::size_t f = 0; f < frames.size(); ++f) {
    const std::string fp = "/frames/" + std::to_string(f);
    VectorMap map;
    map.roi = d.roi;
    map.frame_id = detail::string_value(member(frames[f], "frame_id", fp),
                                        fp + "/frame_id");
    if (!seen_ids.insert(map.frame_id).second) {
      throw SchemaError(fp + "/frame_id",
                        "duplicate frame_id '" + map.frame_id + "'");
    }
    const Json& instances = member(frames[f], "instances", fp);
    if (!instances.is_array()) {
      throw SchemaError(fp + "/instances", "expected an array");
    }
    for (std::size_t k = 0; k < instances.size(); ++k) {
      const std::string ip = fp + "/instances/" + std::to_string(k);
      const Json& inst = instances[k];
      const std::string cls_name =
          detail::string_value(member(inst, "class", ip), ip + "/class");
      const auto cls = parse_map_class(cls_name);
      if (!cls) throw SchemaError(ip + "/class", "unknown class '" + cls_name + "'");
      auto pts = detail::parse_points(member(inst, "points", ip), ip + "/points");

      std::optional<double> confidence;
      const bool has_conf = inst.contains("confidence");
      if (!with_confidence) with_confidence = has_conf;
      if (has_conf != *with_confidence) {
        throw SchemaError(ip + "/confidence",
                          *with_confidence
                              ? "instance is missing a confidence"
                              : "confidence given on only some instances");
      }
      if (has_conf) {
        const double c = detail::number(inst["confidence"], ip + "/confidence");
        if (!(c >= 0.0 && c <= 1.0)) {
          throw SchemaError(ip + "/confidence", "confidence outside [0, 1]");
        }
        if (role != DatasetRole::kGroundTruth) confidence = c;
      }
      try {
        map.instances.push_back({*cls, Polyline(std::move(pts)), confidence});
      } catch (const InvalidGeometry& e) {
        throw SchemaError(ip + "/points", e.what());
      }
    }
    d.frames.push_back(std::move(map));
  }
  return d;
}

inline Dataset parse_dataset(std::string_view text,
                             DatasetRole role = DatasetRole::kAny) {
  return dataset_from_json(detail::parse_json_text(text), role);
}

inline Dataset read_dataset(const std::filesystem::path& path,
                            DatasetRole role = DatasetRole::kAny) {
  return parse_dataset(read_text_file(path), role);
}

inline Json dataset_to_json(const Dataset& d) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  doc["roi"] = {{"lateral", d.roi.lateral_extent},
                {"longitudinal", d.roi.longitudinal_extent}};
  Json frames = Json::array();
  for (const VectorMap& f : d.frames) {
    Json instances = Json::array();
    for (const MapInstance& inst : f.instances) {
      Json j;
      j["class"] = to_string(inst.cls);
      j["points"] = detail::points_json(inst.geometry.points());
      if (inst.confidence) j["confidence"] = *inst.confidence;
      instances.push_back(std::move(j));
    }
    Json frame;
    frame["frame_id"] = f.frame_id;
    frame["instances"] = std::move(instances);
    frames.push_back(std::move(frame));
  }
  doc["frames"] = std::move(frames);
  return doc;
}

inline std::string serialize_dataset(const Dataset& d) {
  return dataset_to_json(d).dump() + "\n";
}

inline void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  write_text_file(path, serialize_dataset(d));
}

// ---------------------------------------------------------------------------
// Reference paths

inline std::vector<ReferencePath> parse_paths(std::string_view text) {
  using detail::member;
  const Json doc = detail::parse_json_text(text);
  detail::check_format_version(doc);
  const Json& paths = member(doc, "paths", "");
  if (!paths.is_array()) throw SchemaError("/paths", "expected an array");
  std::vector<ReferencePath> out;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::string pp = "/paths/" + std::to_string(i);
    ReferencePath p;
    p.frame_id = detail::string_value(member(paths[i], "frame_id", pp),
                                      pp + "/frame_id");
    p.horizon = detail::number(member(paths[i], "horizon", pp), pp + "/horizon");
    p.points = detail::parse_points(member(paths[i], "points", pp), pp + "/points");
    try {
      p.validate();
    } catch (const InvalidArgument& e) {
      throw SchemaError(pp + "/points", e.what());
    }
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<ReferencePath> read_paths(const std::filesystem::path& path) {
  return parse_paths(read_text_file(path));
}

inline std::string serialize_paths(const std::vector<ReferencePath>& paths) {
  Json doc;
  doc["format_version"] = kFormatVersion;
  Json arr = Json::array();
  for (const auto& p : paths) {
    Json j;
    j["frame_id"] = p.frame_id;
    j["horizon"] = p.horizon;
    j["points"] = detail::points_json(p.points);
    arr.push_back(std::move(j));
  }
  doc["paths"] = std::move(arr);
  return doc.dump() + "\n";
}

// ---------------------------------------------------------------------------
// Configuration (flat TOML)

struct ToolConfig {
  EvalConfig eval;
  DistillConfig distill;
};

inline ToolConfig parse_config(std::string_view text) {
  toml::table table;
  try {
    table = toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw SchemaError("", "TOML parse error at line " +
                              std::to_string(e.source().begin.line) + ": " +
                              std::string(e.description()));
  }
  ToolConfig cfg;
  auto real = [](const toml::node& n, const std::string& key) {
    if (auto v = n.value<double>()) return *v;
    throw SchemaError("/" + key, "expected a number");
  };
  auto text_of = [](const toml::node& n, const std::string& key) {
    if (auto v = n.value<std::string>()) return *v;
    throw SchemaError("/" + key, "expected a string");
  };
  for (const auto& [k, node] : table) {
    const std::string key(k.str());
    if (key == "chamfer_thresholds") {
      const auto* arr = node.as_array();
      if (!arr) throw SchemaError("/" + key, "expected an array of numbers");
      cfg.eval.chamfer_thresholds.clear();
      for (std::size_t i = 0; i < arr->size(); ++i) {
        cfg.eval.chamfer_thresholds.push_back(
            real(*arr->get(i), key + "/" + std::to_string(i)));
      }
    } else if (key == "resample_points") {
      const auto v = node.value<std::int64_t>();
      if (!v || *v < 2) throw SchemaError("/" + key, "expected an integer >= 2");
      cfg.eval.resample_points = static_cast<std::size_t>(*v);
    } else if (key == "resample_spacing") {
      cfg.eval.resample_spacing = real(node, key);
    } else if (key == "region_split") {
      const auto s = parse_region_split(text_of(node, key));
      if (!s) throw SchemaError("/" + key, "expected \"clip\" or \"centroid\"");
      cfg.eval.region_split = *s;
    } else if (key == "min_fragment_len") {
      cfg.eval.min_fragment_len = real(node, key);
    } else if (key == "temperature") {
      cfg.distill.temperature = real(node, key);
    } else if (key == "match_cost") {
      const std::string s = text_of(node, key);
      if (s == "kl_logits") {
        cfg.distill.match_cost = MatchCost::kKlLogits;
      } else if (s == "kl_plus_points") {
        cfg.distill.match_cost = MatchCost::kKlPlusPoints;
      } else {
        throw SchemaError("/" + key, "expected \"kl_logits\" or \"kl_plus_points\"");
      }
    } else if (key == "point_cost_weight") {
      cfg.distill.point_cost_weight = real(node, key);
    } else if (key == "grad_epsilon") {
      cfg.distill.grad_epsilon = real(node, key);
    } else if (key == "kl_direction") {
      const std::string s = text_of(node, key);
      if (s == "student_teacher") {
        cfg.distill.kl_direction = KlDirection::kStudentTeacher;
      } else if (s == "teacher_student") {
        cfg.distill.kl_direction = KlDirection::kTeacherStudent;
      } else {
        throw SchemaError("/" + key,
                          "expected \"student_teacher\" or \"teacher_student\"");
      }
    } else if (key == "feature_norm") {
      const std::string s = text_of(node, key);
      if (s == "l2") {
        cfg.distill.feature_norm = FeatureNorm::kL2;
      } else if (s == "squared_l2") {
        cfg.distill.feature_norm = FeatureNorm::kSquaredL2;
      } else {
        throw SchemaError("/" + key, "expected \"l2\" or \"squared_l2\"");
      }
    } else {
      throw SchemaError("/" + key, "unknown config key");
    }
  }
  try {
    cfg.eval.validate();
    cfg.distill.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError("", e.what());
  }
  return cfg;
}

inline ToolConfig read_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

// ---------------------------------------------------------------------------
// Evaluation reports

namespace detail {

// Minimal writer: fixed key order, numbers pre-formatted.
class ReportWriter {
 public:
  std::string str() const { return out_.str(); }

  void open(char c) {
    out_ << c;
    first_.push_back(true);
  }
  void close(char c) {
    first_.pop_back();
    out_ << '\n' << indent() << c;
  }
  void key(std::string_view k) {
    sep();
    out_ << quote(k) << ": ";
  }
  void item() { sep(); }
  void raw(std::string_view v) { out_ << v; }
  void number(double v) { out_ << (std::isnan(v) ? "null" : fmt6(v)); }
  void text(std::string_view v) { out_ << quote(v); }

 private:
  void sep() {
    if (!first_.back()) out_ << ',';
    first_.back() = false;
    out_ << '\n' << indent();
  }
  std::string indent() const { return std::string(2 * first_.size(), ' '); }
  static std::string quote(std::string_view s) {
    return Json(std::string(s)).dump();
  }

  std::ostringstream out_;
  std::vector<bool> first_;
};

inline std::string_view class_column(MapClass c) {
  switch (c) {
    case MapClass::kPedestrianCrossing:
      return "AP_p";
    case MapClass::kLaneDivider:
      return "AP_d";
    case MapClass::kRoadBoundary:
      return "AP_b";
  }
  return "AP";
}

}  // namespace detail

inline std::string report_to_json(const EvalReport& report) {
  detail::ReportWriter w;
  const EvalConfig& cfg = report.config;
  w.open('{');
  w.key("tool");
  w.text(kToolName);
  w.key("version");
  w.text(kToolVersion);
  w.key("config");
  w.open('{');
  w.key("chamfer_thresholds");
  w.open('[');
  for (double t : cfg.chamfer_thresholds) {
    w.item();
    w.number(t);
  }
  w.close(']');
  w.key("resample_points");
  w.raw(std::to_string(cfg.resample_points));
  w.key("resample_spacing");
  w.number(cfg.resample_spacing);
  w.key("region_split");
  w.text(to_string(cfg.region_split));
  w.key("min_fragment_len");
  w.number(cfg.min_fragment_len);
  w.key("empty_class_policy");
  w.text("excluded");
  w.close('}');
  w.key("summary");
  w.open('{');
  w.key("mAP");
  w.number(report.map());
  w.key("A-mAP");
  w.number(report.a_map());
  w.key("R-mAP");
  w.number(report.r_map());
  w.close('}');
  w.key("regions");
  w.open('{');
  for (Region r : kAllRegions) {
    const RegionResult& rr = report.region(r);
    w.key(to_string(r));
    w.open('{');
    w.key("mAP");
    w.number(rr.map);
    w.key("classes");
    w.open('{');
    for (MapClass c : kAllClasses) {
      const ClassResult& cr = rr.classes[index_of(c)];
      w.key(to_string(c));
      w.open('{');
      w.key("AP");
      w.number(cr.ap);
      w.key("AP_per_threshold");
      w.open('{');
      for (std::size_t t = 0; t < cfg.chamfer_thresholds.size(); ++t) {
        w.key(fmt6(cfg.chamfer_thresholds[t]));
        w.number(cr.ap_per_threshold[t]);
      }
      w.close('}');
      w.key("num_gt");
      w.raw(std::to_string(cr.num_gt));
      w.key("num_pred");
      w.raw(std::to_string(cr.num_pred));
      w.key("excluded");
      w.raw(cr.excluded() ? "true" : "false");
      w.close('}');
    }
    w.close('}');
    w.close('}');
  }
  w.close('}');
  w.close('}');
  return w.str() + "\n";
}

// Ranked precision / recall points, one row per prediction per
// (region, class, threshold).
inline std::string pr_points_csv(const EvalReport& report) {
  std::string out = "region,class,threshold,rank,confidence,tp,precision,recall\n";
  for (Region r : kAllRegions) {
    for (MapClass c : kAllClasses) {
      const ClassResult& cr = report.result(r, c);
      for (std::size_t t = 0; t < cr.pr_curves.size(); ++t) {
        const std::string prefix = std::string(to_string(r)) + "," +
                                   std::string(to_string(c)) + "," +
                                   fmt6(report.config.chamfer_thresholds[t]) + ",";
        std::size_t rank = 1;
        for (const PrPoint& p : cr.pr_curves[t]) {
          out += prefix + std::to_string(rank++) + "," + fmt6(p.confidence) +
                 "," + (p.tp ? "1" : "0") + "," + fmt6(p.precision) + "," +
                 fmt6(p.recall) + "\n";
        }
      }
    }
  }
  return out;
}

namespace detail {

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

inline std::string cell(double v) { return std::isnan(v) ? "-" : fmt6(v); }

}  // namespace detail

// Fixed-width table: one row per region, per-class AP and region mAP, then
// the headline mAP / A-mAP / R-mAP line.
inline std::string format_summary(const EvalReport& report) {
  using detail::pad;
  std::string out = pad("region", 10);
  for (MapClass c : kAllClasses) out += pad(std::string(detail::class_column(c)), 12);
  out += "mAP\n";
  for (Region r : kAllRegions) {
    out += pad(std::string(to_string(r)), 10);
    for (MapClass c : kAllClasses) {
      out += pad(detail::cell(report.result(r, c).ap), 12);
    }
    out += detail::cell(report.region(r).map) + "\n";
  }
  out += "mAP " + detail::cell(report.map()) + "  A-mAP " +
         detail::cell(report.a_map()) + "  R-mAP " +
         detail::cell(report.r_map()) + "  (region_split=" +
         std::string(to_string(report.config.region_split)) + ")\n";
  return out;
}

// ---------------------------------------------------------------------------
// Mask study and benchmark tables

inline std::string sensitivity_csv(const std::vector<SensitivityPoint>& curve) {
  std::string out = "ratio,direction,mean_score,min_score,max_score\n";
  for (const auto& p : curve) {
    out += fmt6(p.ratio) + "," + std::string(to_string(p.direction)) + "," +
           fmt6(p.mean_score) + "," + fmt6(p.min_score) + "," +
           fmt6(p.max_score) + "\n";
  }
  return out;
}

struct BenchRow {
  std::string method;
  EvalReport report;
};

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "method,AP_p,AP_d,AP_b,mAP,A-mAP,R-mAP\n";
  for (const auto& row : rows) {
    out += row.method;
    for (MapClass c : kAllClasses) {
      out += "," + detail::cell(row.report.result(Region::kGlobal, c).ap);
    }
    out += "," + detail::cell(row.report.map()) + "," +
           detail::cell(row.report.a_map()) + "," +
           detail::cell(row.report.r_map()) + "\n";
  }
  return out;
}

inline std::string bench_text(const std::vector<BenchRow>& rows) {
  using detail::pad;
  std::size_t name_width = 8;
  for (const auto& row : rows) name_width = std::max(name_width, row.method.size() + 2);
  std::string out = pad("method", name_width);
  for (const char* h : {"AP_p", "AP_d", "AP_b", "mAP", "A-mAP"}) out += pad(h, 12);
  out += "R-mAP\n";
  for (const auto& row : rows) {
    out += pad(row.method, name_width);
    for (MapClass c : kAllClasses) {
      out += pad(detail::cell(row.report.result(Region::kGlobal, c).ap), 12);
    }
    out += pad(detail::cell(row.report.map()), 12) +
           pad(detail::cell(row.report.a_map()), 12) +
           detail::cell(row.report.r_map()) + "\n";
  }
  return out;
}

// Benchmark manifest: {"format_version": "1", "gt": "gt.json",
// "config": "eval.toml" (optional), "methods": [{"name": ..., "pred": ...}]}.
// Paths are relative to the manifest's directory.
struct BenchManifest {
  std::filesystem::path gt;
  std::optional<std::filesystem::path> config;
  std::vector<std::pair<std::string, std::filesystem::path>> methods;
};

inline BenchManifest parse_manifest(std::string_view text,
                                    const std::filesystem::path& base) {
  using detail::member;
  const Json doc = detail::parse_json_text(text);
  detail::check_format_version(doc);
  BenchManifest m;
  m.gt = base / detail::string_value(member(doc, "gt", ""), "/gt");
  if (doc.contains("config")) {
    m.config = base / detail::string_value(doc["config"], "/config");
  }
  const Json& methods = member(doc, "methods", "");
  if (!methods.is_array()) throw SchemaError("/methods", "expected an array");
  if (methods.empty()) throw SchemaError("/methods", "manifest lists no methods");
  std::set<std::string> names;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string mp = "/methods/" + std::to_string(i);
    std::string name =
        detail::string_value(member(methods[i], "name", mp), mp + "/name");
    if (!names.insert(name).second) {
      throw SchemaError(mp + "/name", "duplicate method name '" + name + "'");
    }
    m.methods.emplace_back(
        std::move(name),
        base / detail::string_value(member(methods[i], "pred", mp), mp + "/pred"));
  }
  return m;
}

}  // namespace ahead
