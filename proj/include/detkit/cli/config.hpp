#pragma once

// Run configuration. The config file is a flat `key = value` list ('#' starts
// a comment); command-line flags are applied on top as key overrides, so every
// flag has a config-file key of the same meaning.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/augment.hpp"
#include "detkit/cli/support.hpp"
#include "detkit/error.hpp"
#include "detkit/metrics.hpp"
#include "detkit/split.hpp"
#include "detkit/tiling.hpp"

namespace detkit::cli {

using Settings = std::map<std::string, std::string>;

using OrderedSettings = std::vector<std::pair<std::string, std::string>>;

/// Key/value pairs in file order; a repeated key appears once per occurrence.
inline OrderedSettings parse_settings_ordered(std::string_view text, const std::string& source = {}) {
  OrderedSettings out;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ParseError("expected 'key = value'", line_no, source);
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError("empty key", line_no, source);
      out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
    }
    if (end == text.size()) break;
  }
  return out;
}

/// Last occurrence of a key wins.
inline Settings parse_settings(std::string_view text, const std::string& source = {}) {
  Settings out;
  for (auto& [k, v] : parse_settings_ordered(text, source)) out[k] = v;
  return out;
}

/// "key=value" from a --set flag.
inline std::pair<std::string, std::string> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError(fmt::format("expected key=value, got '{}'", s));
  return {std::string(trim(std::string_view(s).substr(0, eq))),
          std::string(trim(std::string_view(s).substr(eq + 1)))};
}

struct RunConfig {
  Settings settings;  ///< merged snapshot (file + overrides), recorded in the manifest

  std::filesystem::path gt_dir;
  std::filesystem::path pred_dir;
  std::filesystem::path classes;
  std::filesystem::path out_dir = "detkit_out";
  std::filesystem::path ids_file;
  std::filesystem::path image_sizes;
  std::filesystem::path height_records;
  std::filesystem::path profile;
  std::filesystem::path candidates;
  std::vector<std::filesystem::path> stats_inputs;
  std::string response_name;

  double iou_threshold = 0.5;
  double conf_threshold = 0.0;
  ApInterpolation ap_interpolation = ApInterpolation::kAllPoint;

  int image_width = 1600;
  int image_height = 1300;
  TileSpec tile;
  AugmentPipeline augment;
  int augment_samples = 1000;

  SplitRatio split_ratio;
  std::size_t split_sets = 1;
  std::size_t split_set_size = 0;  ///< 0: split the whole id list once
  bool split_with_replacement = false;

  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool allow_partial = false;

  std::map<std::string, std::string> metadata;  ///< free-text provenance (metadata.*)
};

namespace config_detail {

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long long d = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: expected an integer, got '{}'", key, v));
  }
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v.front() == '-') throw std::invalid_argument(v);
    unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("{}: expected an unsigned integer, got '{}'", key, v));
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(fmt::format("{}: expected true/false, got '{}'", key, v));
}

inline SplitRatio to_ratio(const std::string& key, const std::string& v) {
  SplitRatio r;
  int parts[3];
  std::size_t p = 0;
  for (int k = 0; k < 3; ++k) {
    const auto q = v.find(':', p);
    if ((k < 2) == (q == std::string::npos))
      throw ConfigError(fmt::format("{}: expected train:val:test, got '{}'", key, v));
    parts[k] = int(to_int(key, v.substr(p, q == std::string::npos ? q : q - p)));
    p = q + 1;
  }
  r.train = parts[0];
  r.val = parts[1];
  r.test = parts[2];
  r.validate();
  return r;
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t p = 0;
  while (p <= v.size()) {
    auto q = v.find(',', p);
    auto item = trim(std::string_view(v).substr(p, q == std::string::npos ? std::string::npos : q - p));
    if (!item.empty()) out.emplace_back(item);
    if (q == std::string::npos) break;
    p = q + 1;
  }
  return out;
}

inline AugmentKind to_augment_kind(const std::string& name) {
  if (name == "rotate") return AugmentKind::kRotate;
  if (name == "flip_left_right") return AugmentKind::kFlipLeftRight;
  if (name == "flip_top_bottom") return AugmentKind::kFlipTopBottom;
  if (name == "zoom_random") return AugmentKind::kZoomRandom;
  throw ConfigError(fmt::format("unknown augmentation '{}'", name));
}

}  // namespace config_detail

/// Builds a typed config from merged settings. Unknown keys are rejected so
/// typos do not silently fall back to defaults.
inline RunConfig make_run_config(const Settings& s) {
  using namespace config_detail;
  RunConfig c;
  c.settings = s;
  std::vector<std::string> order{"rotate", "flip_left_right", "zoom_random", "flip_top_bottom"};
  std::map<std::string, double> probability{{"rotate", 0.7},
                                            {"flip_left_right", 0.4},
                                            {"zoom_random", 0.4},
                                            {"flip_top_bottom", 0.4}};
  double percentage_area = 0.8, free_rotation = 0.0;
  std::vector<int> angles{90, 180, 270};

  for (const auto& [key, v] : s) {
    if (key == "gt_dir") c.gt_dir = v;
    else if (key == "pred_dir") c.pred_dir = v;
    else if (key == "classes") c.classes = v;
    else if (key == "out_dir") c.out_dir = v;
    else if (key == "ids_file") c.ids_file = v;
    else if (key == "image_sizes") c.image_sizes = v;
    else if (key == "height_records") c.height_records = v;
    else if (key == "profile") c.profile = v;
    else if (key == "candidates") c.candidates = v;
    else if (key == "stats_inputs") {
      for (auto& p : to_list(v)) c.stats_inputs.emplace_back(p);
    } else if (key == "response") c.response_name = v;
    else if (key == "iou_threshold") c.iou_threshold = to_double(key, v);
    else if (key == "conf_threshold") c.conf_threshold = to_double(key, v);
    else if (key == "ap_interpolation") {
      if (v == "all-point") c.ap_interpolation = ApInterpolation::kAllPoint;
      else if (v == "11-point") c.ap_interpolation = ApInterpolation::kElevenPoint;
      else throw ConfigError(fmt::format("ap_interpolation: expected all-point or 11-point, got '{}'", v));
    } else if (key == "image_width") c.image_width = int(to_int(key, v));
    else if (key == "image_height") c.image_height = int(to_int(key, v));
    else if (key == "tile_width") c.tile.tile_w = int(to_int(key, v));
    else if (key == "tile_height") c.tile.tile_h = int(to_int(key, v));
    else if (key == "edge_policy") {
      if (v == "anchor-to-edge") c.tile.edge_policy = EdgePolicy::kAnchorToEdge;
      else if (v == "pad") c.tile.edge_policy = EdgePolicy::kPad;
      else throw ConfigError(fmt::format("edge_policy: expected anchor-to-edge or pad, got '{}'", v));
    } else if (key == "min_visibility") {
      c.tile.min_visibility = to_double(key, v);
      c.augment.min_visibility = c.tile.min_visibility;
    } else if (key == "augment.samples") c.augment_samples = int(to_int(key, v));
    else if (key == "augment.order") order = to_list(v);
    else if (key == "augment.percentage_area") percentage_area = to_double(key, v);
    else if (key == "augment.free_rotation_max_deg") free_rotation = to_double(key, v);
    else if (key == "augment.angles") {
      angles.clear();
      for (auto& a : to_list(v)) angles.push_back(int(to_int(key, a)));
    } else if (key.rfind("augment.", 0) == 0) {
      const std::string op = key.substr(8);
      to_augment_kind(op);
      probability[op] = to_double(key, v);
    } else if (key == "split_ratio") c.split_ratio = to_ratio(key, v);
    else if (key == "split.sets") c.split_sets = std::size_t(to_u64(key, v));
    else if (key == "split.set_size") c.split_set_size = std::size_t(to_u64(key, v));
    else if (key == "split.with_replacement") c.split_with_replacement = to_bool(key, v);
    else if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "jobs") {
      const auto j = to_int(key, v);
      if (j < 1) throw ConfigError("jobs must be >= 1");
      c.jobs = unsigned(j);
    } else if (key == "allow_partial") c.allow_partial = to_bool(key, v);
    else if (key.rfind("metadata.", 0) == 0) c.metadata[key.substr(9)] = v;
    else throw ConfigError(fmt::format("unknown config key '{}'", key));
  }

  if (!(c.iou_threshold > 0.0 && c.iou_threshold <= 1.0))
    throw ConfigError(fmt::format("iou_threshold {} outside (0,1]", c.iou_threshold));
  if (!(c.conf_threshold >= 0.0 && c.conf_threshold <= 1.0))
    throw ConfigError(fmt::format("conf_threshold {} outside [0,1]", c.conf_threshold));
  if (c.image_width <= 0 || c.image_height <= 0) throw ConfigError("image size must be positive");
  if (c.augment_samples < 0) throw ConfigError("augment.samples must be >= 0");
  c.tile.validate();

  c.augment.rng_seed = c.seed;
  for (const auto& name : order) {
    AugmentOp op;
    op.kind = to_augment_kind(name);
    op.probability = probability.count(name) ? probability[name] : 0.0;
    op.percentage_area = percentage_area;
    op.free_rotation_max_deg = free_rotation;
    op.right_angles = angles;
    c.augment.ops.push_back(op);
  }
  c.augment.validate();
  return c;
}

inline RunConfig load_run_config(const std::optional<std::filesystem::path>& config_file,
                                 const Settings& overrides) {
  Settings s;
  if (config_file) s = parse_settings(read_file(*config_file), config_file->string());
  for (const auto& [k, v] : overrides) s[k] = v;
  return make_run_config(s);
}

}  // namespace detkit::cli
