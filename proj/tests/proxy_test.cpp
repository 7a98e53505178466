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
#include <vector>

#include <gtest/gtest.h>

#include "ahead/proxy.hpp"
#include "ahead/scenes.hpp"

namespace ahead {
namespace {

struct Scene {
  Dataset maps;
  std::vector<ReferencePath> paths;
};

Scene make_scene(std::uint64_t seed, std::size_t frames) {
  SceneConfig sc;
  sc.seed = seed;
  sc.num_frames = frames;
  return {generate_scene(sc), generate_reference_paths(sc)};
}

TEST(Proxy, Examples) {
  const Scene s = make_scene(5, 4);
  for (std::size_t f = 0; f < 4; ++f) {
    const VectorMap& m = s.maps.frames[f];
    const double s0 = score_reference_path(m, s.paths[f]);
    EXPECT_GE(s0, 0.0);
    EXPECT_DOUBLE_EQ(score_reference_path(directional_mask(m, {MaskDirection::kForward, 1.0}),
                                          s.paths[f]),
                     5.0);
    EXPECT_NEAR(score_reference_path(directional_mask(m, {MaskDirection::kBackward, 1.0}),
                                     s.paths[f]),
                s0, 1e-9);
  }
}

TEST(Proxy, CentredPathScoresZero) {
  const VectorMap m{"f",
                    {{MapClass::kLaneDivider, Polyline({{-1.75, -30}, {-1.75, 30}}), std::nullopt},
                     {MapClass::kLaneDivider, Polyline({{1.75, -30}, {1.75, 30}}), std::nullopt}},
                    Roi{}};
  const ReferencePath path{"f", {{0, 0}, {0, 10}, {0, 20}}, 30};
  EXPECT_DOUBLE_EQ(score_reference_path(m, path), 0.0);
}

TEST(Proxy, Errors) {
  const VectorMap m{"f", {}, Roi{}};
  EXPECT_THROW(score_reference_path(m, {"f", {}, 30}), InvalidArgument);
  EXPECT_THROW(score_reference_path(m, {"f", {{0, 5}, {0, 1}}, 30}), InvalidArgument);
  EXPECT_THROW(score_reference_path(m, {"f", {{0, -1}, {0, 1}}, 30}), InvalidArgument);
}

TEST(Proxy, IgnoresOrderAndConfidence) {
  const Scene s = make_scene(6, 3);
  for (std::size_t f = 0; f < 3; ++f) {
    VectorMap m = s.maps.frames[f];
    const double s0 = score_reference_path(m, s.paths[f]);
    std::reverse(m.instances.begin(), m.instances.end());
    for (auto& inst : m.instances) inst.confidence = 0.3;
    EXPECT_EQ(score_reference_path(m, s.paths[f]), s0);
  }
}

TEST(Proxy, StudyMonotoneForwardFlatBackward) {
  const Scene s = make_scene(9, 10);
  std::vector<double> ratios;
  for (int k = 0; k <= 20; ++k) ratios.push_back(k / 20.0);
  for (auto mode : {MaskMode::kFarFirst, MaskMode::kNearFirst}) {
    const auto fwd = mask_sensitivity_study(s.maps, s.paths, ratios, MaskDirection::kForward, mode);
    const auto bwd = mask_sensitivity_study(s.maps, s.paths, ratios, MaskDirection::kBackward, mode);
    for (std::size_t k = 1; k < ratios.size(); ++k) {
      for (std::size_t f = 0; f < 10; ++f) {
        EXPECT_GE(fwd[k].frame_scores[f], fwd[k - 1].frame_scores[f] - 1e-12);
        EXPECT_NEAR(bwd[k].frame_scores[f], bwd[0].frame_scores[f], 1e-9);
      }
    }
    EXPECT_GT(fwd.back().mean_score, fwd.front().mean_score);
  }
}

TEST(Proxy, StudySingleRatioIsBaseline) {
  const Scene s = make_scene(10, 3);
  const auto curve = mask_sensitivity_study(s.maps, s.paths, {0.0}, MaskDirection::kForward);
  ASSERT_EQ(curve.size(), 1u);
  double mean = 0.0;
  for (std::size_t f = 0; f < 3; ++f) mean += score_reference_path(s.maps.frames[f], s.paths[f]);
  EXPECT_NEAR(curve[0].mean_score, mean / 3.0, 1e-15);
}

TEST(Proxy, StudyRejectsBadRatios) {
  const Scene s = make_scene(11, 2);
  EXPECT_THROW(mask_sensitivity_study(s.maps, s.paths, {0.5, 0.2}, MaskDirection::kForward),
               InvalidArgument);
  EXPECT_THROW(mask_sensitivity_study(s.maps, s.paths, {1.2}, MaskDirection::kForward),
               InvalidArgument);
}

}  // namespace
}  // namespace ahead
