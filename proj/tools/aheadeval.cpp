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

// aheadeval: command-line front end.
//
//   aheadeval eval          --pred P --gt G [--config C] --out R
//   aheadeval gen           --seed N --frames K --out G [--noise PRESET]
//                           [--pred-out P] [--paths-out PATHS]
//   aheadeval mask-study    --pred M --paths PATHS --direction D
//                           --ratios 0,0.5,1 --out CSV
//   aheadeval distill-check [--trials N] [--seed S]
//   aheadeval bench-table   --runs DIR --out CSV
//
// Exit codes: 0 success, 1 failed check / runtime error, 2 bad arguments,
// 3 schema violation, 4 frame-set mismatch.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ahead/io.hpp"
#include "ahead/metrics.hpp"
#include "ahead/proxy.hpp"
#include "ahead/scenes.hpp"
#include "ahead/verify.hpp"

namespace {

namespace fs = std::filesystem;

constexpr int kExitFailure = 1;
constexpr int kExitBadArgs = 2;
constexpr int kExitSchema = 3;
constexpr int kExitFrames = 4;

// Argument problems detected after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ahead::ToolConfig load_config(const std::string& path) {
  return path.empty() ? ahead::ToolConfig{} : ahead::read_config(path);
}

fs::path companion_pr_path(const fs::path& out) {
  fs::path p = out;
  p.replace_extension(".pr.csv");
  return p;
}

int run_eval(const std::string& pred_path, const std::string& gt_path,
             const std::string& config_path, const std::string& out_path,
             const std::string& pr_out) {
  const auto cfg = load_config(config_path);
  const auto gt = ahead::read_dataset(gt_path, ahead::DatasetRole::kGroundTruth);
  const auto pred = ahead::read_dataset(pred_path, ahead::DatasetRole::kPrediction);
  const auto report = ahead::evaluate(pred, gt, cfg.eval);
  ahead::write_text_file(out_path, ahead::report_to_json(report));
  ahead::write_text_file(pr_out.empty() ? companion_pr_path(out_path) : fs::path(pr_out),
                         ahead::pr_points_csv(report));
  std::cout << ahead::format_summary(report);
  return 0;
}

int run_gen(std::uint64_t seed, std::size_t frames, const std::string& out,
            const std::string& noise, const std::string& pred_out,
            const std::string& paths_out, double rear_scale) {
  auto nm = ahead::noise_preset(noise);
  if (!nm) throw UsageError("unknown noise preset '" + noise + "'");
  if (rear_scale > 0.0) nm->rear_noise_scale = rear_scale;

  ahead::SceneConfig sc;
  sc.seed = seed;
  sc.num_frames = frames;
  const auto gt = ahead::generate_scene(sc);
  ahead::write_dataset(out, gt);
  if (!pred_out.empty()) {
    ahead::write_dataset(pred_out,
                         ahead::perturb_dataset(gt, *nm, seed ^ 0x5eed5eedULL));
  }
  if (!paths_out.empty()) {
    ahead::write_text_file(paths_out,
                           ahead::serialize_paths(ahead::generate_reference_paths(sc)));
  }
  return 0;
}

std::vector<double> parse_ratios(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("cannot parse ratio '" + item + "'");
    }
    if (used != item.size()) throw UsageError("cannot parse ratio '" + item + "'");
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError("ratio outside [0, 1]: " + item);
    if (!out.empty() && v < out.back()) throw UsageError("ratios must be ascending");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("no ratios given");
  return out;
}

int run_mask_study(const std::string& pred_path, const std::string& paths_path,
                   const std::string& direction, const std::string& ratios,
                   const std::string& mode, const std::string& out) {
  const auto dir = ahead::parse_mask_direction(direction);
  if (!dir) throw UsageError("direction must be forward or backward");
  const auto mask_mode = ahead::parse_mask_mode(mode);
  if (!mask_mode) throw UsageError("mode must be far_first or near_first");
  const auto ratio_list = parse_ratios(ratios);
  const auto maps = ahead::read_dataset(pred_path, ahead::DatasetRole::kAny);
  const auto paths = ahead::read_paths(paths_path);
  const auto curve =
      ahead::mask_sensitivity_study(maps, paths, ratio_list, *dir, *mask_mode);
  const std::string csv = ahead::sensitivity_csv(curve);
  ahead::write_text_file(out, csv);
  std::cout << csv;
  return 0;
}

int run_distill_check(std::size_t trials, std::uint64_t seed, bool inject) {
  ahead::verify::CheckOptions opt;
  opt.trials = trials;
  opt.seed = seed;
  opt.inject_sign_flip = inject;
  bool all = true;
  std::printf("%-34s %-14s %-10s %s\n", "check", "max_error", "tolerance",
              "result");
  for (const auto& r : ahead::verify::run_distill_checks(opt)) {
    std::printf("%-34s %-14.6e %-10.0e %s\n", r.name.c_str(), r.max_error,
                r.tolerance, r.passed ? "PASS" : "FAIL");
    if (!r.passed) {
      all = false;
      std::printf("    failing configuration: %s\n", r.worst_case.c_str());
    }
  }
  return all ? 0 : kExitFailure;
}

int run_bench_table(const std::string& runs_dir, const std::string& out) {
  const fs::path manifest_path = fs::path(runs_dir) / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw ahead::SchemaError("", "missing " + manifest_path.string());
  }
  const auto manifest =
      ahead::parse_manifest(ahead::read_text_file(manifest_path), runs_dir);
  const auto cfg = manifest.config ? ahead::read_config(*manifest.config)
                                   : ahead::ToolConfig{};
  const auto gt = ahead::read_dataset(manifest.gt, ahead::DatasetRole::kGroundTruth);
  std::vector<ahead::BenchRow> rows;
  for (const auto& [name, pred_path] : manifest.methods) {
    const auto pred =
        ahead::read_dataset(pred_path, ahead::DatasetRole::kPrediction);
    rows.push_back({name, ahead::evaluate(pred, gt, cfg.eval)});
  }
  ahead::write_text_file(out, ahead::bench_csv(rows));
  std::cout << ahead::bench_text(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ahead-aware evaluation toolkit for vectorized HD maps"};
  app.require_subcommand(1);

  std::string pred, gt, config, out, pr_out;
  auto* eval = app.add_subcommand("eval", "Evaluate predictions: mAP, A-mAP, R-mAP");
  eval->add_option("--pred", pred, "Prediction dataset (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", gt, "Ground-truth dataset (JSON)")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", config, "Flat TOML config")->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Report JSON")->required();
  eval->add_option("--pr-out", pr_out, "PR points CSV (default: <out>.pr.csv)");

  std::uint64_t seed = 0;
  std::size_t frames = 0;
  std::string noise = "balanced", pred_out, paths_out;
  double rear_scale = 0.0;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--seed", seed, "Random seed")->required();
  gen->add_option("--frames", frames, "Number of frames")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", out, "Ground-truth output (JSON)")->required();
  gen->add_option("--noise", noise, "Noise preset: none, balanced, rear_biased, heavy")
      ->check(CLI::IsMember({"none", "balanced", "rear_biased", "heavy"}));
  gen->add_option("--pred-out", pred_out, "Also write perturbed predictions");
  gen->add_option("--paths-out", paths_out, "Also write ego reference paths");
  gen->add_option("--rear-noise-scale", rear_scale, "Override the preset's rear noise scale")
      ->check(CLI::PositiveNumber);

  std::string paths, direction, ratios, mode = "far_first";
  auto* study = app.add_subcommand("mask-study", "Directional masking sensitivity study");
  study->add_option("--pred", pred, "Map dataset to mask (JSON)")->required()->check(CLI::ExistingFile);
  study->add_option("--paths", paths, "Reference paths (JSON)")->required()->check(CLI::ExistingFile);
  study->add_option("--direction", direction, "forward or backward")->required();
  study->add_option("--ratios", ratios, "Comma-separated ascending ratios in [0,1]")->required();
  study->add_option("--mode", mode, "far_first or near_first");
  study->add_option("--out", out, "Output CSV")->required();

  std::size_t trials = 100;
  std::uint64_t check_seed = 0;
  bool inject = false;
  auto* check = app.add_subcommand("distill-check", "Gradient and assignment self-checks");
  check->add_option("--trials", trials, "Random configurations per check")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "Random seed");
  check->add_flag("--inject-sign-flip", inject)->group("");

  std::string runs;
  auto* bench = app.add_subcommand("bench-table", "Combined per-method benchmark table");
  bench->add_option("--runs", runs, "Directory with manifest.json")->required()->check(CLI::ExistingDirectory);
  bench->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitBadArgs;
  }

  try {
    if (*eval) return run_eval(pred, gt, config, out, pr_out);
    if (*gen) return run_gen(seed, frames, out, noise, pred_out, paths_out, rear_scale);
    if (*study) return run_mask_study(pred, paths, direction, ratios, mode, out);
    if (*check) return run_distill_check(trials, check_seed, inject);
    if (*bench) return run_bench_table(runs, out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadArgs;
  } catch (const ahead::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return kExitSchema;
  } catch (const ahead::FrameMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFrames;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
