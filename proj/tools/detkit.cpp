// detkit: command-line front end for the detection evaluation toolkit.
//
//   detkit <command> [--config FILE] [--set key=value]... [flags]
//
// Every flag is shorthand for a config key, so a run can be reproduced from
// the `config` block of its manifest.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detkit/cli/commands.hpp"

namespace {

using detkit::cli::CommandResult;
using detkit::cli::RunConfig;

struct Flag {
  const char* name;
  const char* key;
  const char* help;
};

// Per-command shorthand flags.
const std::map<std::string, std::vector<Flag>> kFlags = {
    {"tile",
     {{"--gt-dir", "gt_dir", "directory of YOLO annotation files"},
      {"--classes", "classes", "class registry file (id name per line)"},
      {"--image-sizes", "image_sizes", "CSV image_id,width,height"},
      {"--tile-width", "tile_width", "tile width in pixels"},
      {"--tile-height", "tile_height", "tile height in pixels"},
      {"--edge-policy", "edge_policy", "anchor-to-edge or pad"},
      {"--min-visibility", "min_visibility", "minimum visible fraction to keep a box"}}},
    {"augment",
     {{"--gt-dir", "gt_dir", "directory of YOLO annotation files"},
      {"--classes", "classes", "class registry file"},
      {"--image-sizes", "image_sizes", "CSV image_id,width,height"},
      {"--samples", "augment.samples", "number of augmented samples"},
      {"--min-visibility", "min_visibility", "minimum visible fraction to keep a box"}}},
    {"split",
     {{"--ids", "ids_file", "file with one image id per line"},
      {"--gt-dir", "gt_dir", "take ids from annotation file names"},
      {"--ratio", "split_ratio", "train:val:test, default 15:3:2"},
      {"--sets", "split.sets", "number of sampled subsets"},
      {"--set-size", "split.set_size", "images per subset (0 = split all ids once)"}}},
    {"evaluate",
     {{"--gt-dir", "gt_dir", "directory of ground-truth annotation files"},
      {"--pred-dir", "pred_dir", "directory of prediction files"},
      {"--classes", "classes", "class registry file"},
      {"--iou", "iou_threshold", "IoU threshold for a true positive"},
      {"--conf", "conf_threshold", "drop detections below this confidence"},
      {"--ap", "ap_interpolation", "all-point or 11-point"}}},
    {"stats",
     {{"--inputs", "stats_inputs", "comma-separated CSV files of group,observation"},
      {"--response", "response", "response name (single input only)"},
      {"--height-records", "height_records", "CSV image_id,stratum,placed,detected"}}},
    {"desirability",
     {{"--candidates", "candidates", "CSV label,response,value"},
      {"--profile", "profile", "goal profile file"}}},
    {"report", {}},
};

const std::map<std::string, const char*> kDescriptions = {
    {"tile", "cut images into fixed-size tiles and re-project annotations"},
    {"augment", "generate augmented annotation samples"},
    {"split", "partition image ids into train/val/test"},
    {"evaluate", "match predictions to ground truth and compute metrics"},
    {"stats", "normality checks, one-way ANOVA and pairwise t tests"},
    {"desirability", "rank candidates by overall desirability"},
    {"report", "collect the outputs of a run into one report"},
};

using CommandFn = CommandResult (*)(const RunConfig&);

CommandFn lookup(const std::string& name) {
  using namespace detkit::cli;
  if (name == "tile") return cmd_tile;
  if (name == "augment") return cmd_augment;
  if (name == "split") return cmd_split;
  if (name == "evaluate") return cmd_evaluate;
  if (name == "stats") return cmd_stats;
  if (name == "desirability") return cmd_desirability;
  return cmd_report;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const detkit::Error*>(&e)) return detkit::cli::kExitInput;
  return detkit::cli::kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detkit: dataset preparation, detection metrics, statistics and model selection"};
  app.set_version_flag("--version", std::string(detkit::cli::kToolkitVersion));
  app.require_subcommand(1);

  std::optional<std::string> config_file;
  std::vector<std::string> assignments;
  std::optional<std::string> out_dir, seed, jobs;
  bool allow_partial = false;
  app.add_option("--config", config_file, "config file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("--set", assignments, "override a config key (key=value), repeatable");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--jobs", jobs, "worker threads; results do not depend on it");
  app.add_flag("--allow-partial", allow_partial, "tolerate prediction files without ground truth");
  app.fallthrough();

  std::map<std::string, std::map<std::string, std::optional<std::string>>> values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, flags] : kFlags) {
    auto* sub = app.add_subcommand(name, kDescriptions.at(name));
    sub->fallthrough();
    for (const auto& f : flags) sub->add_option(f.name, values[name][f.key], f.help);
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : detkit::cli::kExitInput;
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    detkit::cli::Settings overrides;
    for (const auto& a : assignments) {
      auto [k, v] = detkit::cli::parse_assignment(a);
      overrides[k] = v;
    }
    for (const auto& [key, v] : values[command])
      if (v) overrides[key] = *v;
    if (out_dir) overrides["out_dir"] = *out_dir;
    if (seed) overrides["seed"] = *seed;
    if (jobs) overrides["jobs"] = *jobs;
    if (allow_partial) overrides["allow_partial"] = "true";

    const RunConfig cfg = detkit::cli::load_run_config(
        config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt, overrides);
    const CommandResult result = lookup(command)(cfg);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& o : result.outputs) std::cout << (cfg.out_dir / o).string() << "\n";
    if (result.error) std::cerr << result.error->dump() << "\n";
    return result.exit_code;
  } catch (const std::exception& e) {
    std::cerr << detkit::cli::error_record(command, e).dump() << "\n";
    return exit_code_for(e);
  }
}
