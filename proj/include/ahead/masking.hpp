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

// Directional masking: erase map geometry in a longitudinal band ahead of or
// behind the ego vehicle.

#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include "ahead/errors.hpp"
#include "ahead/geometry.hpp"
#include "ahead/metrics.hpp"

namespace ahead {

enum class MaskDirection { kForward, kBackward };
// far_first grows the band from the ROI edge towards the ego; near_first
// grows it from the ego outwards.
enum class MaskMode { kFarFirst, kNearFirst };

inline std::string_view to_string(MaskDirection d) {
  return d == MaskDirection::kForward ? "forward" : "backward";
}

inline std::optional<MaskDirection> parse_mask_direction(std::string_view s) {
  if (s == "forward") return MaskDirection::kForward;
  if (s == "backward") return MaskDirection::kBackward;
  return std::nullopt;
}

inline std::string_view to_string(MaskMode m) {
  return m == MaskMode::kFarFirst ? "far_first" : "near_first";
}

inline std::optional<MaskMode> parse_mask_mode(std::string_view s) {
  if (s == "far_first") return MaskMode::kFarFirst;
  if (s == "near_first") return MaskMode::kNearFirst;
  return std::nullopt;
}

struct MaskSpec {
  MaskDirection direction = MaskDirection::kForward;
  double ratio = 0.0;
  MaskMode mode = MaskMode::kFarFirst;
  double min_fragment_len = kDefaultMinFragmentLength;

  void validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
      throw InvalidArgument("mask ratio must lie in [0, 1]");
    }
  }
};

struct Band {
  double lo;
  double hi;
};

// Longitudinal band removed by `mask_spec` for a ROI of half-length `extent`.
inline Band mask_band(const MaskSpec& mask_spec, double extent) {
  const double r = mask_spec.ratio;
  Band b = mask_spec.mode == MaskMode::kFarFirst
               ? Band{extent * (1.0 - r), extent}
               : Band{0.0, extent * r};
  if (mask_spec.direction == MaskDirection::kBackward) b = {-b.hi, -b.lo};
  return b;
}

inline VectorMap directional_mask(const VectorMap& m, const MaskSpec& mask_spec) {
  mask_spec.validate();
  m.roi.validate();
  if (mask_spec.ratio == 0.0) return m;
  const Band band = mask_band(mask_spec, m.roi.longitudinal_extent);
  VectorMap out{m.frame_id, {}, m.roi};
  for (const MapInstance& inst : m.instances) {
    for (auto& piece : clip_to_band(inst.geometry, Axis::kLongitudinal, band.lo,
                                    band.hi, Keep::kOutside,
                                    mask_spec.min_fragment_len)) {
      out.instances.push_back({inst.cls, std::move(piece), inst.confidence});
    }
  }
  return out;
}

}  // namespace ahead
