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

// Acceptance suite: one PASS/FAIL line per criterion AC-1 .. AC-8.
// Exit status is 0 only if every criterion passes. AHEAD_CLI and
// AHEAD_FIXTURES are injected by CMake.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ahead/assignment.hpp"
#include "ahead/io.hpp"
#include "ahead/metrics.hpp"
#include "ahead/proxy.hpp"
#include "ahead/scenes.hpp"
#include "ahead/verify.hpp"
#include "micro_cases.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ahead;

struct Outcome {
  bool passed;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit;  // seconds; 0 = none
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome ac1_ap_oracle() {
  std::mt19937_64 rng(20261);
  std::size_t rational = 0, real = 0, skipped = 0;
  double worst_rational = 0.0, worst_real = 0.0;
  while (rational < 1000 || real < 500) {
    const bool is_rational = rational < 1000 && (real >= 500 || rng() % 3 != 0);
    const auto c = micro::make_case(rng, is_rational);
    const auto o = micro::oracle_ap(c);
    if (o.ambiguous) {
      ++skipped;
      continue;
    }
    const double err =
        micro::max_ap_error(evaluate(c.pred, c.gt, micro::config_for(c)), o,
                            c.thresholds.size());
    if (is_rational) {
      ++rational;
      worst_rational = std::max(worst_rational, err);
    } else {
      ++real;
      worst_real = std::max(worst_real, err);
    }
  }
  return {worst_rational <= 1e-12 && worst_real <= 1e-9,
          std::to_string(rational) + " rational cases max err " + fmt("%.1e", worst_rational) +
              ", " + std::to_string(real) + " real cases max err " + fmt("%.1e", worst_real) +
              " (" + std::to_string(skipped) + " boundary ties skipped)"};
}

Outcome ac2_hungarian() {
  std::mt19937_64 rng(20262);
  std::size_t failures = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t rows = 1 + rng() % 8, cols = 1 + rng() % 8;
    if (std::min(rows, cols) == 8) rows = 7;
    const bool integer = trial % 2 == 0;
    std::vector<double> v(rows * cols);
    for (double& x : v) {
      x = integer ? static_cast<double>(static_cast<int>(rng() % 50) - 10)
                  : std::uniform_real_distribution<double>(-100.0, 100.0)(rng);
    }
    const double got = hungarian_min_cost(CostMatrix(rows, cols, v)).total_cost;
    const double want = oracle::brute_min_assignment(v, rows, cols);
    const double err = std::abs(got - want);
    worst = std::max(worst, integer ? 0.0 : err);
    if (integer ? got != want : err > 1e-9) ++failures;
  }
  return {failures == 0, "500 matrices, " + std::to_string(failures) +
                             " mismatches, max real error " + fmt("%.1e", worst)};
}

Outcome ac3_gradients() {
  verify::CheckOptions opt;
  opt.trials = 100;
  opt.seed = 20263;
  const auto feat = verify::check_feature_gradients(opt);
  const auto logit = verify::check_logits_gradients(opt);
  return {feat.passed && logit.passed && feat.max_error < 1e-4 && logit.max_error < 1e-4,
          "100 configs each: feature max rel err " + fmt("%.2e", feat.max_error) +
              ", logits max rel err " + fmt("%.2e", logit.max_error)};
}

Outcome ac4_mirror() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneConfig sc;
    sc.seed = 4000 + seed;
    sc.num_frames = 6;
    const Dataset gt = generate_scene(sc);
    const Dataset pred = perturb_dataset(gt, *noise_preset("rear_biased"), seed);
    const auto a = evaluate(pred, gt, EvalConfig{});
    const auto b = evaluate(mirror_longitudinal(pred), mirror_longitudinal(gt), EvalConfig{});
    worst = std::max({worst, std::abs(a.a_map() - b.r_map()), std::abs(a.r_map() - b.a_map())});
  }
  return {worst <= 1e-12, "50 datasets, max |A-mAP(D) - R-mAP(mirror D)| " + fmt("%.1e", worst)};
}

Outcome ac5_rear_bias() {
  const std::vector<double> rhos{0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> gaps;
  for (double rho : rhos) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      SceneConfig sc;
      sc.seed = seed;
      sc.num_frames = 40;
      const Dataset gt = generate_scene(sc);
      NoiseModel nm = *noise_preset("balanced");
      nm.rear_noise_scale = rho;
      const auto r = evaluate(perturb_dataset(gt, nm, seed ^ 0x5eed5eedULL), gt, EvalConfig{});
      sum += 100.0 * (r.r_map() - r.a_map());
    }
    gaps.push_back(sum / 50.0);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < gaps.size(); ++i) monotone &= gaps[i] <= gaps[i - 1];
  std::string detail = "mean gap (points)";
  for (std::size_t i = 0; i < rhos.size(); ++i) {
    detail += " rho=" + fmt("%.1f", rhos[i]) + ":" + fmt("%.2f", gaps[i]);
  }
  return {gaps.front() > 5.0 && monotone && std::abs(gaps.back()) < 2.0, detail};
}

Outcome ac6_masking() {
  std::vector<double> ratios;
  for (int k = 0; k <= 20; ++k) ratios.push_back(k / 20.0);
  double worst_drop = 0.0, worst_backward = 0.0, fwd_rise = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SceneConfig sc;
    sc.seed = 6000 + seed;
    sc.num_frames = 4;
    const Dataset maps = generate_scene(sc);
    const auto paths = generate_reference_paths(sc);
    const auto fwd = mask_sensitivity_study(maps, paths, ratios, MaskDirection::kForward);
    const auto bwd = mask_sensitivity_study(maps, paths, ratios, MaskDirection::kBackward);
    for (std::size_t k = 1; k < ratios.size(); ++k) {
      for (std::size_t f = 0; f < maps.frames.size(); ++f) {
        worst_drop = std::max(worst_drop, fwd[k - 1].frame_scores[f] - fwd[k].frame_scores[f]);
        worst_backward = std::max(
            worst_backward, std::abs(bwd[k].frame_scores[f] - bwd[0].frame_scores[f]));
      }
    }
    fwd_rise += fwd.back().mean_score - fwd.front().mean_score;
  }
  return {worst_drop <= 1e-12 && worst_backward <= 1e-9 && fwd_rise > 0.0,
          "50 scenes: max forward per-frame decrease " + fmt("%.1e", worst_drop) +
              ", max backward deviation " + fmt("%.1e", worst_backward) +
              ", mean forward rise " + fmt("%.3f", fwd_rise / 50.0)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AHEAD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome ac7_determinism() {
  const fs::path dir =
      fs::temp_directory_path() / ("aheadeval_ac7_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  bool identical = true;
  std::vector<std::string> produced[2];
  for (int pass = 0; pass < 2; ++pass) {
    const fs::path d = dir / std::to_string(pass);
    fs::create_directories(d);
    const std::string gt = (d / "gt.json").string(), pred = (d / "pred.json").string();
    if (run_cli("gen --seed 77 --frames 25 --noise rear_biased --out " + gt + " --pred-out " +
                pred + " --paths-out " + (d / "paths.json").string()) != 0 ||
        run_cli("eval --pred " + pred + " --gt " + gt + " --out " + (d / "report.json").string()) != 0) {
      fs::remove_all(dir);
      return {false, "CLI invocation failed"};
    }
    for (const char* name : {"gt.json", "pred.json", "paths.json", "report.json", "report.pr.csv"}) {
      produced[pass].push_back(read_text_file(d / name));
    }
  }
  identical = produced[0] == produced[1];

  std::size_t fixtures = 0;
  bool round_trip = true;
  for (const auto& entry : fs::directory_iterator(AHEAD_FIXTURES)) {
    const auto& p = entry.path();
    if (p.extension() != ".json") continue;
    const std::string text = read_text_file(p);
    const std::string again = p.filename() == "paths.json"
                                  ? serialize_paths(parse_paths(text))
                                  : serialize_dataset(parse_dataset(text));
    round_trip &= again == text;
    ++fixtures;
  }
  for (const auto& text : {produced[0][0], produced[0][1]}) {
    round_trip &= serialize_dataset(parse_dataset(text)) == text;
  }
  round_trip &= serialize_paths(parse_paths(produced[0][2])) == produced[0][2];
  fs::remove_all(dir);
  return {identical && round_trip && fixtures > 0,
          std::string("gen+eval twice ") + (identical ? "byte-identical" : "DIFFER") +
              "; parse/serialize identity on " + std::to_string(fixtures) + " fixtures + 3 outputs " +
              (round_trip ? "holds" : "BROKEN")};
}

Outcome ac8_throughput() {
  // 1000 frames x 50 instances: short random polylines per class, with
  // jittered predictions.
  std::mt19937_64 rng(20268);
  std::uniform_real_distribution<double> ux(-14.0, 14.0), uy(-28.0, 28.0),
      uh(-3.14, 3.14), uc(0.0, 1.0);
  std::normal_distribution<double> jitter(0.0, 0.3);
  Dataset gt, pred;
  for (int f = 0; f < 1000; ++f) {
    VectorMap g{"f" + std::to_string(f), {}, Roi{}}, p = g;
    for (int k = 0; k < 50; ++k) {
      const MapClass cls = kAllClasses[static_cast<std::size_t>(k % 3)];
      const double x = ux(rng), y = uy(rng), h = uh(rng);
      std::vector<Point2> a, b;
      for (int i = 0; i < 6; ++i) {
        const Point2 v{x + i * std::cos(h), y + i * std::sin(h)};
        a.push_back(v);
        b.push_back({v.x + jitter(rng), v.y + jitter(rng)});
      }
      g.instances.push_back({cls, Polyline(a), std::nullopt});
      p.instances.push_back({cls, Polyline(b), uc(rng)});
    }
    gt.frames.push_back(std::move(g));
    pred.frames.push_back(std::move(p));
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = evaluate(pred, gt, EvalConfig{});
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {secs < 10.0 && std::isfinite(report.map()),
          "1000x50 evaluated in " + fmt("%.2f", secs) + " s on " +
              std::to_string(resolve_thread_count()) + " thread(s)"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"AC-1", "AP oracle equivalence", 30.0, ac1_ap_oracle},
      {"AC-2", "Hungarian optimality", 10.0, ac2_hungarian},
      {"AC-3", "gradient fidelity", 60.0, ac3_gradients},
      {"AC-4", "mirror symmetry", 0.0, ac4_mirror},
      {"AC-5", "rear-bias gap", 120.0, ac5_rear_bias},
      {"AC-6", "masking asymmetry", 0.0, ac6_masking},
      {"AC-7", "determinism and round-trip", 0.0, ac7_determinism},
      {"AC-8", "throughput", 0.0, ac8_throughput},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit > 0.0 && secs >= c.time_limit) {
      o.passed = false;
      o.detail += "; over time limit " + fmt("%.0f", c.time_limit) + " s";
    }
    std::printf("%s %s  %s: %s [%.2f s]\n", c.id, o.passed ? "PASS" : "FAIL", c.title,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += o.passed ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
