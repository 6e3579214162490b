#pragma once

// The toolkit's subcommands. Each command reads its inputs, writes its outputs
// under `out_dir`, and records a RunManifest (manifest_<command>.json).
// Numeric outputs never depend on `jobs`: work is split per image (or per
// sample / response) into indexed slots and folded in a fixed order.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "detkit/augment.hpp"
#include "detkit/cli/config.hpp"
#include "detkit/cli/support.hpp"
#include "detkit/desirability.hpp"
#include "detkit/error.hpp"
#include "detkit/height.hpp"
#include "detkit/matching.hpp"
#include "detkit/metrics.hpp"
#include "detkit/shapiro_wilk.hpp"
#include "detkit/split.hpp"
#include "detkit/stats.hpp"
#include "detkit/tiling.hpp"
#include "detkit/yolo_io.hpp"

#ifndef DETKIT_VERSION
#define DETKIT_VERSION "0.0.0"
#endif

namespace detkit::cli {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = DETKIT_VERSION;

/// Exit statuses.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitInput = 2,     ///< bad config, unreadable or malformed input
  kExitMismatch = 3,  ///< evaluation inputs disagree on image ids
};

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> outputs;   ///< paths written, relative to out_dir
  std::vector<std::string> warnings;
  std::optional<json> error;  ///< machine-readable record when exit_code != 0
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json error_record(const std::string& command, const std::exception& e) {
  json err;
  err["command"] = command;
  if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
    err["kind"] = pe->kind();
    err["message"] = pe->message();
    if (!pe->file().empty()) err["file"] = pe->file();
    if (pe->line() > 0) err["line"] = pe->line();
  } else if (const auto* de = dynamic_cast<const Error*>(&e)) {
    err["kind"] = de->kind();
    err["message"] = de->what();
  } else {
    err["kind"] = "internal";
    err["message"] = e.what();
  }
  return json{{"error", err}};
}

/// Collects input digests during a run and writes manifest_<command>.json.
class RunManifest {
 public:
  RunManifest(std::string command, const RunConfig& cfg)
      : command_(std::move(command)), cfg_(cfg), started_(utc_timestamp()) {}

  /// Reads a file and records its digest; returns the content.
  std::string read_input(const fs::path& path) {
    std::string content = read_file(path);
    inputs_[path.generic_string()] = {sha256_hex(content), content.size()};
    return content;
  }

  void add_output(const std::string& rel) { outputs_.insert(rel); }

  json to_json(bool with_timestamps) const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "manifest";
    j["command"] = command_;
    j["toolkit_version"] = kToolkitVersion;
    json config = json::object();
    for (const auto& [k, v] : cfg_.settings) config[k] = v;
    j["config"] = config;
    json inputs = json::array();
    for (const auto& [p, d] : inputs_)
      inputs.push_back({{"path", p}, {"sha256", d.first}, {"bytes", d.second}});
    j["inputs"] = inputs;
    j["outputs"] = std::vector<std::string>(outputs_.begin(), outputs_.end());
    if (with_timestamps) j["timestamps"] = {{"started", started_}, {"finished", utc_timestamp()}};
    return j;
  }

  void write() const {
    write_file(cfg_.out_dir / fmt::format("manifest_{}.json", command_), to_json(true).dump(2) + "\n");
  }

 private:
  std::string command_;
  const RunConfig& cfg_;
  std::string started_;
  std::map<std::string, std::pair<std::string, std::size_t>> inputs_;
  std::set<std::string> outputs_;
};

namespace commands_detail {

inline void emit(const RunConfig& cfg, RunManifest& manifest, CommandResult& result,
                 const std::string& rel, std::string_view content) {
  write_file(cfg.out_dir / rel, content);
  manifest.add_output(rel);
  result.outputs.push_back(rel);
}

inline ClassRegistry load_registry(const RunConfig& cfg, RunManifest& manifest) {
  if (cfg.classes.empty()) throw ConfigError("classes: a class registry file is required");
  const std::string text = manifest.read_input(cfg.classes);
  try {
    auto reg = parse_class_registry(text);
    if (reg.empty()) throw RegistryError("class registry is empty");
    return reg;
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), cfg.classes.string());
  } catch (const RegistryError& e) {
    throw RegistryError(fmt::format("{}: {}", cfg.classes.string(), e.what()));
  }
}

template <typename T, typename Parser>
T parse_in_file(const fs::path& file, const std::string& text, Parser&& parser) {
  try {
    return parser(text);
  } catch (const ParseError& e) {
    throw ParseError(e.message(), e.line(), file.string());
  } catch (const RegistryError& e) {
    throw RegistryError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

inline std::map<std::string, std::pair<int, int>> load_image_sizes(const RunConfig& cfg,
                                                                   RunManifest& manifest) {
  std::map<std::string, std::pair<int, int>> sizes;
  if (cfg.image_sizes.empty()) return sizes;
  manifest.read_input(cfg.image_sizes);
  for (const auto& row : read_csv(cfg.image_sizes, {"image_id", "width", "height"})) {
    const long w = parse_long(row.fields[1], row.line, cfg.image_sizes, "width");
    const long h = parse_long(row.fields[2], row.line, cfg.image_sizes, "height");
    if (w <= 0 || h <= 0) throw ParseError("image size must be positive", row.line, cfg.image_sizes.string());
    sizes[row.fields[0]] = {int(w), int(h)};
  }
  return sizes;
}

/// Ground-truth annotation files of `gt_dir` as images, sorted by id.
inline std::vector<AnnotatedImage> load_annotated_images(const RunConfig& cfg, const ClassRegistry& reg,
                                                         RunManifest& manifest) {
  if (cfg.gt_dir.empty()) throw ConfigError("gt_dir: a ground-truth directory is required");
  const auto files = list_files(cfg.gt_dir, ".txt");
  if (files.empty())
    throw IoError(fmt::format("no annotation files (*.txt) in '{}'", cfg.gt_dir.string()));
  const auto sizes = load_image_sizes(cfg, manifest);
  std::vector<AnnotatedImage> images;
  for (const auto& f : files) {
    AnnotatedImage img;
    img.image_id = f.stem().string();
    auto it = sizes.find(img.image_id);
    img.width_px = it == sizes.end() ? cfg.image_width : it->second.first;
    img.height_px = it == sizes.end() ? cfg.image_height : it->second.second;
    const std::string text = manifest.read_input(f);
    img.objects = parse_in_file<std::vector<GroundTruthObject>>(
        f, text, [&](const std::string& t) { return parse_yolo_annotation(t, reg); });
    images.push_back(std::move(img));
  }
  return images;
}

inline std::string fmt_real(double v) { return fmt::format("{}", v); }

}  // namespace commands_detail

// ---------------------------------------------------------------------------
// tile

inline CommandResult cmd_tile(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("tile", cfg);
  const auto reg = load_registry(cfg, manifest);
  const auto images = load_annotated_images(cfg, reg, manifest);

  std::vector<std::vector<TileAnnotation>> per_image(images.size());
  parallel_for(images.size(), cfg.jobs, [&](std::size_t i) {
    const auto tiles = plan_tiles(images[i].width_px, images[i].height_px, cfg.tile);
    per_image[i] = retile_annotations(images[i], tiles, cfg.tile);
  });

  std::string manifest_csv = "tile_id,src_image,x0,y0,w,h\n";
  std::string discarded_csv = "tile_id\n";
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (const auto& ta : per_image[i]) {
      manifest_csv += fmt::format("{},{},{},{},{},{}\n", ta.image.image_id, images[i].image_id,
                                  ta.tile.x0, ta.tile.y0, ta.tile.w, ta.tile.h);
      if (ta.discardable) {
        discarded_csv += ta.image.image_id + "\n";
        continue;
      }
      emit(cfg, manifest, result, "labels/" + ta.image.image_id + ".txt",
           serialize_yolo(ta.image.objects));
    }
  }
  emit(cfg, manifest, result, "tiles.csv", manifest_csv);
  emit(cfg, manifest, result, "discarded.csv", discarded_csv);
  manifest.write();
  return result;
}

// ---------------------------------------------------------------------------
// augment

inline CommandResult cmd_augment(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("augment", cfg);
  const auto reg = load_registry(cfg, manifest);
  const auto images = load_annotated_images(cfg, reg, manifest);

  // Like a sampling augmentation pipeline, each sample draws its source image
  // uniformly; the draw uses its own stream so it is independent of the ops.
  const std::size_t n = std::size_t(cfg.augment_samples);
  std::vector<std::size_t> source(n);
  std::vector<AugmentedSample> samples(n);
  parallel_for(n, cfg.jobs, [&](std::size_t s) {
    Stream pick(cfg.seed ^ 0x5eed5eed5eed5eedULL, s);
    source[s] = std::size_t(pick.below(images.size()));
    samples[s] = augment_sample(images[source[s]], cfg.augment, s);
  });

  std::string index_csv = "sample_id,src_image,width,height,operations,discardable\n";
  std::size_t kept = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& smp = samples[s];
    index_csv += fmt::format("{},{},{},{},{},{}\n", smp.image.image_id, images[source[s]].image_id,
                             smp.image.width_px, smp.image.height_px,
                             smp.applied.empty() ? "none" : fmt::format("{}", fmt::join(smp.applied, "+")),
                             smp.discardable ? "true" : "false");
    if (smp.discardable) continue;
    ++kept;
    emit(cfg, manifest, result, "augmented/" + smp.image.image_id + ".txt",
         serialize_yolo(smp.image.objects));
  }
  if (kept < n)
    result.warnings.push_back(fmt::format("{} of {} samples contain no objects and were discarded",
                                          n - kept, n));
  emit(cfg, manifest, result, "augment.csv", index_csv);
  manifest.write();
  return result;
}

// ---------------------------------------------------------------------------
// split

inline CommandResult cmd_split(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("split", cfg);
  std::vector<std::string> ids;
  if (!cfg.ids_file.empty()) {
    const std::string text = manifest.read_input(cfg.ids_file);
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      auto line = trim(std::string_view(text).substr(start, end - start));
      if (!line.empty() && line.front() != '#') ids.emplace_back(line);
      start = end + 1;
    }
  } else if (!cfg.gt_dir.empty()) {
    for (const auto& f : list_files(cfg.gt_dir, ".txt")) ids.push_back(f.stem().string());
  } else {
    throw ConfigError("split needs ids_file or gt_dir");
  }
  if (ids.empty()) throw IoError("no image ids to split");
  {
    std::set<std::string> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw ParseError("duplicate image ids in split input", 0);
  }

  auto write_split = [&](const std::vector<std::string>& set, std::uint64_t seed, const std::string& rel) {
    auto parts = split_dataset(set, cfg.split_ratio, seed);
    std::string csv = "image_id,partition\n";
    for (auto* p : {&parts.train, &parts.val, &parts.test}) std::sort(p->begin(), p->end());
    for (const auto& id : parts.train) csv += id + ",train\n";
    for (const auto& id : parts.val) csv += id + ",val\n";
    for (const auto& id : parts.test) csv += id + ",test\n";
    emit(cfg, manifest, result, rel, csv);
  };

  if (cfg.split_set_size == 0) {
    write_split(ids, cfg.seed, "split.csv");
  } else {
    const auto subsets =
        sample_subsets(ids, cfg.split_sets, cfg.split_set_size, cfg.split_with_replacement, cfg.seed);
    for (std::size_t k = 0; k < subsets.size(); ++k)
      write_split(subsets[k], splitmix64(cfg.seed + k + 1), fmt::format("split_{:02d}.csv", k));
  }
  manifest.write();
  return result;
}

// ---------------------------------------------------------------------------
// evaluate

inline constexpr const char* kTnConvention =
    "true negatives are not countable for open-scene detection; accuracy uses TN = 0, "
    "i.e. TP / (TP + FP + FN)";

inline json metric_json(const Metric& m) { return m.value; }

inline CommandResult cmd_evaluate(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("evaluate", cfg);
  const auto reg = load_registry(cfg, manifest);
  if (cfg.gt_dir.empty()) throw ConfigError("gt_dir: a ground-truth directory is required");
  if (cfg.pred_dir.empty()) throw ConfigError("pred_dir: a predictions directory is required");

  const auto gt_files = list_files(cfg.gt_dir, ".txt");
  if (gt_files.empty())
    throw IoError(fmt::format("no annotation files (*.txt) in '{}'", cfg.gt_dir.string()));
  const auto pred_files = list_files(cfg.pred_dir, ".txt");
  std::map<std::string, fs::path> pred_by_id;
  for (const auto& p : pred_files) pred_by_id[p.stem().string()] = p;

  std::vector<std::string> ids;
  std::vector<ImageEval> evals;
  std::vector<std::string> without_predictions;
  for (const auto& g : gt_files) {
    const std::string id = g.stem().string();
    ImageEval ev;
    ev.truths = parse_in_file<std::vector<GroundTruthObject>>(
        g, manifest.read_input(g), [&](const std::string& t) { return parse_yolo_annotation(t, reg); });
    if (auto it = pred_by_id.find(id); it != pred_by_id.end()) {
      auto dets = parse_in_file<std::vector<Detection>>(
          it->second, manifest.read_input(it->second),
          [&](const std::string& t) { return parse_yolo_prediction(t, reg); });
      for (auto& d : dets)
        if (d.confidence >= cfg.conf_threshold) ev.detections.push_back(d);
      pred_by_id.erase(it);
    } else {
      without_predictions.push_back(id);
    }
    ids.push_back(id);
    evals.push_back(std::move(ev));
  }
  std::vector<std::string> orphan_predictions;
  for (const auto& [id, p] : pred_by_id) orphan_predictions.push_back(id);

  std::vector<MatchReport> per_class(evals.size()), cross(evals.size());
  parallel_for(evals.size(), cfg.jobs, [&](std::size_t i) {
    per_class[i] = match(evals[i].detections, evals[i].truths, cfg.iou_threshold, false);
    cross[i] = match(evals[i].detections, evals[i].truths, cfg.iou_threshold, true);
  });
  const ClassTallies tallies = aggregate_tallies(per_class);

  const auto& labels = reg.labels();
  std::vector<PRCurve> curves(labels.size());
  parallel_for(labels.size(), cfg.jobs, [&](std::size_t k) {
    curves[k] = pr_curve(evals, labels[k].id, cfg.iou_threshold);
  });

  json classes = json::array();
  std::vector<double> aps;
  ClassTally overall;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const ClassTally t = tallies.count(labels[k].id) ? tallies.at(labels[k].id) : ClassTally{};
    overall += t;
    const double ap = average_precision(curves[k], cfg.ap_interpolation);
    aps.push_back(ap);
    const Metric p = precision(t), r = recall(t), f = f1(t), a = detection_accuracy(t);
    std::size_t det_count = 0;
    for (const auto& ev : evals)
      for (const auto& d : ev.detections) det_count += d.label == labels[k].id;
    json c;
    c["id"] = labels[k].id;
    c["name"] = labels[k].name;
    c["ap"] = ap;
    c["precision"] = p.value;
    c["recall"] = r.value;
    c["f1"] = f.value;
    c["accuracy"] = a.value;
    c["tp"] = t.tp;
    c["fp"] = t.fp;
    c["fn"] = t.fn;
    c["truth_count"] = curves[k].truth_count;
    c["detection_count"] = det_count;
    c["degenerate"] = {{"precision", p.degenerate}, {"recall", r.degenerate}, {"f1", f.degenerate},
                       {"accuracy", a.degenerate}, {"ap", curves[k].truth_count == 0}};
    classes.push_back(c);

    std::string csv = "threshold,precision,recall\n";
    for (const auto& pt : curves[k].points)
      csv += fmt::format("{},{},{}\n", pt.threshold, pt.precision, pt.recall);
    emit(cfg, manifest, result, fmt::format("pr_{}.csv", labels[k].name), csv);
  }

  const ConfusionMatrix cm = confusion_matrix(cross, reg);
  json cm_labels = json::array();
  for (const auto& l : cm.classes) cm_labels.push_back(l.name);
  cm_labels.push_back("background");

  const Metric p = precision(overall), r = recall(overall), f = f1(overall), a = detection_accuracy(overall);
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "evaluation";
  doc["tn_convention"] = kTnConvention;
  doc["iou_threshold"] = cfg.iou_threshold;
  doc["conf_threshold"] = cfg.conf_threshold;
  doc["ap_interpolation"] = cfg.ap_interpolation == ApInterpolation::kAllPoint ? "all-point" : "11-point";
  doc["matching"] = "greedy by descending confidence, per class, highest IoU first";
  doc["image_count"] = evals.size();
  doc["classes"] = classes;
  doc["overall"] = {{"precision", p.value}, {"recall", r.value}, {"f1", f.value}, {"accuracy", a.value},
                    {"tp", overall.tp}, {"fp", overall.fp}, {"fn", overall.fn},
                    {"degenerate", {{"precision", p.degenerate}, {"recall", r.degenerate},
                                    {"f1", f.degenerate}, {"accuracy", a.degenerate}}}};
  doc["map"] = mean_average_precision(aps);
  doc["map_label"] = fmt::format("mAP@{:g}", cfg.iou_threshold * 100.0);
  doc["confusion_matrix"] = {{"rows", "predicted"}, {"columns", "truth"}, {"labels", cm_labels},
                             {"counts", cm.counts}};
  doc["images_without_predictions"] = without_predictions;
  doc["unmatched_prediction_files"] = orphan_predictions;
  emit(cfg, manifest, result, "evaluation.json", doc.dump(2) + "\n");

  if (!without_predictions.empty())
    result.warnings.push_back(fmt::format("{} image(s) have no prediction file; treated as no detections",
                                          without_predictions.size()));
  if (!orphan_predictions.empty()) {
    if (cfg.allow_partial) {
      result.warnings.push_back(fmt::format("{} prediction file(s) have no ground truth and were ignored",
                                            orphan_predictions.size()));
    } else {
      result.exit_code = kExitMismatch;
      json err;
      err["command"] = "evaluate";
      err["kind"] = "id_mismatch";
      err["message"] = fmt::format("{} prediction file(s) have no matching ground truth "
                                   "(use --allow-partial to ignore)", orphan_predictions.size());
      err["missing_ground_truth"] = orphan_predictions;
      result.error = json{{"error", err}};
    }
  }
  manifest.write();
  return result;
}

// ---------------------------------------------------------------------------
// stats

namespace commands_detail {

inline ObservationTable load_observation_table(const fs::path& file, const std::string& response,
                                               RunManifest& manifest, std::string& effect) {
  manifest.read_input(file);
  const std::string text = read_file(file);
  ObservationTable table;
  table.response = response;
  effect = "group";
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 0, start = 0;
  bool first = true;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    auto line = trim(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
      throw ParseError("expected 'group,observation'", line_no, file.string());
    const std::string group(trim(line.substr(0, comma)));
    const std::string value(trim(line.substr(comma + 1)));
    if (first) {
      first = false;
      if (value == "observation") {  // header row names the effect
        effect = group;
        continue;
      }
    }
    const double v = parse_double(value, line_no, file, "observation");
    auto [it, inserted] = index.emplace(group, table.groups.size());
    if (inserted) table.groups.push_back({group, {}});
    table.groups[it->second].values.push_back(v);
  }
  return table;
}

inline json normality_json(std::span<const double> sample) {
  if (sample.size() < 3) return {{"status", "skipped"}, {"reason", "fewer than 3 observations"}};
  try {
    const SWResult sw = shapiro_wilk(sample);
    return {{"status", "ok"}, {"n", sw.n}, {"W", sw.w}, {"p_value", sw.p_value},
            {"normal_at_0.05", sw.p_value >= 0.05}};
  } catch (const DomainError& e) {
    return {{"status", "undefined"}, {"reason", e.what()}};
  }
}

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json anova_json(const AnovaResult& a) {
  json j;
  j["F_ratio"] = optional_json(a.f_ratio);
  j["prob_gt_F"] = optional_json(a.p_value);
  j["df"] = {a.df_between, a.df_within};
  j["ss_between"] = a.ss_between;
  j["ss_within"] = a.ss_within;
  j["ss_total"] = a.ss_total;
  j["ms_between"] = a.ms_between;
  j["ms_within"] = a.ms_within;
  j["grand_mean"] = a.grand_mean;
  j["degenerate"] = a.degenerate;
  return j;
}

inline json response_json(const ObservationTable& table, const std::string& effect) {
  json j;
  j["response"] = table.response;
  j["effect"] = effect;
  table.validate();
  const AnovaResult a = anova_oneway(table);
  std::vector<double> residuals;
  for (const auto& g : a.residuals) residuals.insert(residuals.end(), g.begin(), g.end());
  json normality;
  normality["residuals"] = normality_json(residuals);
  json per_group = json::array();
  for (const auto& g : table.groups) {
    json ng = normality_json(g.values);
    ng["group"] = g.label;
    per_group.push_back(ng);
  }
  normality["groups"] = per_group;
  j["normality"] = normality;  // checked before the effect test
  j["F_ratio"] = optional_json(a.f_ratio);
  j["prob_gt_F"] = optional_json(a.p_value);
  j["anova"] = anova_json(a);
  json groups = json::array();
  for (std::size_t i = 0; i < table.groups.size(); ++i) {
    const auto d = describe(table.groups[i].values);
    groups.push_back({{"label", table.groups[i].label}, {"n", d.n}, {"mean", d.mean},
                      {"sd", optional_json(d.sd)}, {"effect", a.effects[i]}});
  }
  j["groups"] = groups;
  json pairwise = json::array();
  for (const auto& t : t_test_pairwise(table))
    pairwise.push_back({{"group_a", t.group_a}, {"group_b", t.group_b},
                        {"mean_difference", t.mean_difference}, {"t", optional_json(t.t)},
                        {"df", t.df}, {"p_value", optional_json(t.p_value)},
                        {"degenerate", t.degenerate}});
  j["pairwise_t"] = pairwise;
  return j;
}

inline std::vector<HeightRecord> load_height_records(const fs::path& file, RunManifest& manifest) {
  manifest.read_input(file);
  std::vector<HeightRecord> out;
  for (const auto& row : read_csv(file, {"image_id", "stratum", "placed", "detected"})) {
    HeightRecord r;
    r.image_id = row.fields[0];
    try {
      r.stratum = parse_stratum(row.fields[1]);
    } catch (const ParseError& e) {
      throw ParseError(e.message(), row.line, file.string());
    }
    r.placed = int(parse_long(row.fields[2], row.line, file, "placed"));
    r.detected = int(parse_long(row.fields[3], row.line, file, "detected"));
    try {
      r.validate();
    } catch (const DomainError& e) {
      throw ParseError(e.what(), row.line, file.string());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace commands_detail

inline CommandResult cmd_stats(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("stats", cfg);
  if (cfg.stats_inputs.empty() && cfg.height_records.empty())
    throw ConfigError("stats needs stats_inputs and/or height_records");
  if (!cfg.response_name.empty() && cfg.stats_inputs.size() > 1)
    throw ConfigError("response name override applies to a single stats input only");

  const std::size_t n = cfg.stats_inputs.size();
  std::vector<ObservationTable> tables(n);
  std::vector<std::string> effects(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = cfg.stats_inputs[i];
    const std::string name = cfg.response_name.empty() ? f.stem().string() : cfg.response_name;
    tables[i] = load_observation_table(f, name, manifest, effects[i]);
  }
  std::vector<json> blocks(n);
  std::vector<std::string> failures(n);
  parallel_for(n, cfg.jobs, [&](std::size_t i) {
    try {
      blocks[i] = response_json(tables[i], effects[i]);
    } catch (const DomainError& e) {
      failures[i] = e.what();
      blocks[i] = {{"response", tables[i].response}, {"effect", effects[i]}, {"error", e.what()}};
    }
  });

  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "stats";
  doc["model"] = "one-way fixed effects, least squares";
  doc["responses"] = blocks;
  std::string csv = "response,effect,F_ratio,prob_gt_F\n";
  for (std::size_t i = 0; i < n; ++i) {
    if (!failures[i].empty()) continue;
    const auto& b = blocks[i];
    csv += fmt::format("{},{},{},{}\n", tables[i].response, effects[i],
                       b["F_ratio"].is_null() ? "NA" : fmt_real(b["F_ratio"].get<double>()),
                       b["prob_gt_F"].is_null() ? "NA" : fmt_real(b["prob_gt_F"].get<double>()));
  }

  if (!cfg.height_records.empty()) {
    const auto records = load_height_records(cfg.height_records, manifest);
    json strata = json::array();
    ObservationTable table;
    table.response = "bag_based_accuracy";
    for (Stratum s : {Stratum::kTop, Stratum::kMiddle, Stratum::kBottom}) {
      const BagAccuracy acc = bag_based_accuracy(records, s);
      for (const auto& w : acc.warnings) result.warnings.push_back(w);
      json per_image = json::array();
      for (std::size_t k = 0; k < acc.image_ids.size(); ++k)
        per_image.push_back({{"image_id", acc.image_ids[k]}, {"fraction", acc.percentages[k] / 100.0}});
      strata.push_back({{"stratum", to_string(s)}, {"n", acc.percentages.size()},
                        {"mean_fraction", acc.mean / 100.0},
                        {"sd_fraction", acc.sd ? json(*acc.sd / 100.0) : json(nullptr)},
                        {"images", per_image}});
      table.groups.push_back({to_string(s), acc.percentages});
    }
    json height;
    height["strata"] = strata;
    try {
      json effect = response_json(table, "height");
      height["effect_test"] = effect;
      csv += fmt::format("{},{},{},{}\n", table.response, "height",
                         effect["F_ratio"].is_null() ? "NA" : fmt_real(effect["F_ratio"].get<double>()),
                         effect["prob_gt_F"].is_null() ? "NA" : fmt_real(effect["prob_gt_F"].get<double>()));
    } catch (const DomainError& e) {
      height["effect_test"] = {{"error", e.what()}};
      failures.push_back(e.what());
    }
    height["note"] = "percentages are computed per image as 100 * detected / placed; "
                     "the effect test runs on those percentages";
    doc["height_effect"] = height;
  }

  emit(cfg, manifest, result, "stats.json", doc.dump(2) + "\n");
  emit(cfg, manifest, result, "stats.csv", csv);
  manifest.write();

  std::vector<std::string> msgs;
  for (const auto& f : failures)
    if (!f.empty()) msgs.push_back(f);
  if (!msgs.empty()) {
    result.exit_code = kExitInput;
    json err;
    err["command"] = "stats";
    err["kind"] = "domain";
    err["message"] = msgs.front();
    err["failures"] = msgs;
    result.error = json{{"error", err}};
  }
  return result;
}

// ---------------------------------------------------------------------------
// desirability

/// Profile file keys: goal.<name>.direction, .low, .middle, .high, .weight.
/// Goals keep the order in which their names first appear.
inline DesirabilityProfile parse_profile(std::string_view text, const std::string& source = {}) {
  DesirabilityProfile profile;
  std::map<std::string, std::size_t> index;
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& [key, value] : parse_settings_ordered(text, source)) {
    if (key.rfind("goal.", 0) != 0) throw ConfigError(fmt::format("{}: unknown profile key '{}'", source, key));
    const auto dot = key.rfind('.');
    if (dot <= 5) throw ConfigError(fmt::format("{}: expected goal.<name>.<field>, got '{}'", source, key));
    const std::string name = key.substr(5, dot - 5);
    const std::string field = key.substr(dot + 1);
    auto [it, inserted] = index.emplace(name, profile.goals.size());
    if (inserted) {
      ResponseGoal g;
      g.name = name;
      profile.goals.push_back(g);
    }
    ResponseGoal& g = profile.goals[it->second];
    seen[name].insert(field);
    if (field == "direction") g.direction = parse_goal_direction(value);
    else if (field == "low") g.low = config_detail::to_double(key, value);
    else if (field == "middle") g.middle = config_detail::to_double(key, value);
    else if (field == "high") g.high = config_detail::to_double(key, value);
    else if (field == "weight") g.weight = config_detail::to_double(key, value);
    else throw ConfigError(fmt::format("{}: unknown goal field '{}'", source, field));
  }
  for (const auto& g : profile.goals)
    for (const char* req : {"low", "middle", "high"})
      if (!seen[g.name].count(req))
        throw ConfigError(fmt::format("{}: goal '{}' is missing '{}'", source, g.name, req));
  profile.validate();
  return profile;
}

inline std::vector<Candidate> load_candidates(const fs::path& file, RunManifest& manifest) {
  manifest.read_input(file);
  std::vector<Candidate> out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : read_csv(file, {"label", "response", "value"})) {
    auto [it, inserted] = index.emplace(row.fields[0], out.size());
    if (inserted) out.push_back({row.fields[0], {}});
    auto& responses = out[it->second].responses;
    if (responses.count(row.fields[1]))
      throw ParseError(fmt::format("duplicate response '{}' for candidate '{}'", row.fields[1], row.fields[0]),
                       row.line, file.string());
    responses[row.fields[1]] = parse_double(row.fields[2], row.line, file, "value");
  }
  if (out.empty()) throw IoError(fmt::format("no candidates in '{}'", file.string()));
  return out;
}

inline CommandResult cmd_desirability(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("desirability", cfg);
  if (cfg.candidates.empty()) throw ConfigError("candidates: a candidate CSV is required");
  DesirabilityProfile profile = reference_profile();
  if (!cfg.profile.empty()) profile = parse_profile(manifest.read_input(cfg.profile), cfg.profile.string());
  const auto candidates = load_candidates(cfg.candidates, manifest);
  const auto ranking = select_best(candidates, profile);

  std::string csv = "rank,label,D";
  for (std::size_t k = 0; k < profile.goals.size(); ++k) csv += fmt::format(",d_{}", k + 1);
  csv += "\n";
  json ranked = json::array();
  for (const auto& r : ranking) {
    csv += fmt::format("{},{},{:.6f}", r.rank, r.label, r.overall);
    for (double d : r.individual) csv += fmt::format(",{:.6f}", d);
    csv += "\n";
    json ds = json::object();
    for (std::size_t k = 0; k < profile.goals.size(); ++k) ds[profile.goals[k].name] = r.individual[k];
    ranked.push_back({{"rank", r.rank}, {"label", r.label}, {"D", r.overall}, {"d", ds}, {"tied", r.tied}});
    if (r.tied) result.warnings.push_back(fmt::format("candidate '{}' is tied on D; ordered by label", r.label));
  }
  json goals = json::array();
  for (std::size_t k = 0; k < profile.goals.size(); ++k) {
    const auto& g = profile.goals[k];
    goals.push_back({{"column", fmt::format("d_{}", k + 1)}, {"name", g.name},
                     {"direction", to_string(g.direction)}, {"low", g.low}, {"middle", g.middle},
                     {"high", g.high}, {"weight", g.weight}});
  }
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "desirability";
  doc["combination"] = "weighted geometric mean";
  doc["selection"] = "argmax of D over the candidate set";
  doc["goals"] = goals;
  doc["ranking"] = ranked;
  emit(cfg, manifest, result, "desirability.csv", csv);
  emit(cfg, manifest, result, "desirability.json", doc.dump(2) + "\n");
  manifest.write();
  return result;
}

// ---------------------------------------------------------------------------
// report

namespace commands_detail {

inline std::string percent(double fraction) { return fmt::format("{:.2f}%", 100.0 * fraction); }

inline std::string report_text(const json& doc) {
  std::string out = fmt::format("detkit run report (toolkit {})\n", doc["toolkit_version"].get<std::string>());
  const auto& s = doc["sections"];

  out += "\n== Evaluation ==\n";
  if (s["evaluation"].contains("status")) {
    out += "absent\n";
  } else {
    const auto& e = s["evaluation"];
    out += fmt::format("images: {}  IoU threshold: {}\n", e["image_count"].get<std::size_t>(),
                       e["iou_threshold"].get<double>());
    out += fmt::format("note: {}\n", e["tn_convention"].get<std::string>());
    for (const auto& c : e["classes"])
      out += fmt::format("  {:<12} AP {}  P {}  R {}  F1 {}  Acc {}  (TP {} FP {} FN {})\n",
                         c["name"].get<std::string>(), percent(c["ap"]), percent(c["precision"]),
                         percent(c["recall"]), percent(c["f1"]), percent(c["accuracy"]),
                         c["tp"].get<std::size_t>(), c["fp"].get<std::size_t>(), c["fn"].get<std::size_t>());
    out += fmt::format("  {}: {}\n", e["map_label"].get<std::string>(), percent(e["map"]));
  }

  out += "\n== Effect tests ==\n";
  if (s["stats"].contains("status")) {
    out += "absent\n";
  } else {
    auto line = [&](const json& r) {
      if (r.contains("error")) return fmt::format("  {:<24} error: {}\n", r["response"].get<std::string>(),
                                                  r["error"].get<std::string>());
      std::string f = r["F_ratio"].is_null() ? "n/a" : fmt::format("{:.4f}", r["F_ratio"].get<double>());
      std::string p = r["prob_gt_F"].is_null() ? "n/a" : fmt::format("{:.4g}", r["prob_gt_F"].get<double>());
      return fmt::format("  {:<24} effect {:<10} F {:<12} Prob>F {}\n", r["response"].get<std::string>(),
                         r["effect"].get<std::string>(), f, p);
    };
    for (const auto& r : s["stats"]["responses"]) out += line(r);
    if (s["stats"].contains("height_effect")) {
      const auto& h = s["stats"]["height_effect"];
      for (const auto& st : h["strata"])
        out += fmt::format("  bag-based accuracy {:<7} mean {}  sd {}\n", st["stratum"].get<std::string>(),
                           percent(st["mean_fraction"]),
                           st["sd_fraction"].is_null() ? "n/a" : percent(st["sd_fraction"]));
      if (!h["effect_test"].contains("error")) out += line(h["effect_test"]);
    }
  }

  out += "\n== Desirability ==\n";
  if (s["desirability"].contains("status")) {
    out += "absent\n";
  } else {
    for (const auto& r : s["desirability"]["ranking"])
      out += fmt::format("  {}. {:<12} D = {:.4f}{}\n", r["rank"].get<std::size_t>(),
                         r["label"].get<std::string>(), r["D"].get<double>(),
                         r["tied"].get<bool>() ? " (tied)" : "");
  }
  out += "\n== Manifests ==\n";
  for (const auto& m : doc["manifests"])
    out += fmt::format("  {:<14} {} input file(s)\n", m["command"].get<std::string>(), m["inputs"].size());
  return out;
}

}  // namespace commands_detail

inline CommandResult cmd_report(const RunConfig& cfg) {
  using namespace commands_detail;
  CommandResult result;
  RunManifest manifest("report", cfg);
  if (!fs::is_directory(cfg.out_dir))
    throw IoError(fmt::format("output directory '{}' does not exist", cfg.out_dir.string()));

  auto section = [&](const char* file) -> json {
    const fs::path p = cfg.out_dir / file;
    if (!fs::exists(p)) return {{"status", "absent"}};
    try {
      return json::parse(manifest.read_input(p));
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), 0, p.string());
    }
  };
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["kind"] = "report";
  doc["toolkit_version"] = kToolkitVersion;
  doc["sections"] = {{"evaluation", section("evaluation.json")},
                     {"stats", section("stats.json")},
                     {"desirability", section("desirability.json")}};
  json manifests = json::array();
  for (const char* cmd : {"tile", "augment", "split", "evaluate", "stats", "desirability"}) {
    const fs::path p = cfg.out_dir / fmt::format("manifest_{}.json", cmd);
    if (!fs::exists(p)) continue;
    json m = json::parse(read_file(p));
    m.erase("timestamps");
    manifests.push_back(m);
  }
  doc["manifests"] = manifests;
  for (const char* name : {"evaluation", "stats", "desirability"})
    if (doc["sections"][name].contains("status"))
      result.warnings.push_back(fmt::format("{} section absent", name));

  emit(cfg, manifest, result, "report.json", doc.dump(2) + "\n");
  emit(cfg, manifest, result, "report.txt", report_text(doc));
  manifest.write();
  return result;
}

}  // namespace detkit::cli
