#pragma once

// Plain-text YOLO annotation, prediction and class registry formats.
//
//   annotation:  <class_id> <cx> <cy> <w> <h>
//   prediction:  <class_id> <cx> <cy> <w> <h> <confidence>
//   registry:    <id> <name>
//
// One record per line, whitespace separated, blank lines ignored.

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "detkit/annotations.hpp"
#include "detkit/error.hpp"

namespace detkit {

namespace yolo_detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = text.substr(start, end - start);
    auto fields = split_fields(line);
    if (!fields.empty()) fn(line_no, fields);
    if (end == text.size()) break;
    start = end + 1;
  }
}

inline double parse_real(std::string_view field, std::size_t line, const char* what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(v))
    throw ParseError(fmt::format("non-numeric {} '{}'", what, field), line);
  return v;
}

inline ClassId parse_class(std::string_view field, std::size_t line) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size() || v < 0)
    throw ParseError(fmt::format("invalid class id '{}'", field), line);
  return v;
}

inline BoundingBox parse_box(const std::vector<std::string_view>& f, std::size_t line) {
  static constexpr const char* names[] = {"cx", "cy", "w", "h"};
  double v[4];
  for (int k = 0; k < 4; ++k) {
    v[k] = parse_real(f[k + 1], line, names[k]);
    if (v[k] < 0.0 || v[k] > 1.0)
      throw ParseError(fmt::format("out-of-range {} {} (expected [0,1])", names[k], f[k + 1]), line);
  }
  if (v[2] == 0.0 || v[3] == 0.0)
    throw ParseError("zero-area box (w or h is 0)", line);
  return {v[0], v[1], v[2], v[3]};
}

inline void require_known(const ClassRegistry& registry, ClassId id, std::size_t line) {
  if (!registry.contains(id))
    throw RegistryError(fmt::format("line {}: unknown class id {}", line, id));
}

}  // namespace yolo_detail

inline std::vector<GroundTruthObject> parse_yolo_annotation(std::string_view text,
                                                            const ClassRegistry& registry) {
  using namespace yolo_detail;
  std::vector<GroundTruthObject> out;
  for_each_line(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 5)
      throw ParseError(fmt::format("expected 5 fields, found {}", f.size()), line);
    GroundTruthObject obj{parse_class(f[0], line), parse_box(f, line)};
    require_known(registry, obj.label, line);
    out.push_back(obj);
  });
  return out;
}

inline std::vector<Detection> parse_yolo_prediction(std::string_view text,
                                                    const ClassRegistry& registry) {
  using namespace yolo_detail;
  std::vector<Detection> out;
  for_each_line(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 6)
      throw ParseError(fmt::format("expected 6 fields, found {}", f.size()), line);
    Detection det{parse_class(f[0], line), parse_box(f, line), 0.0};
    det.confidence = parse_real(f[5], line, "confidence");
    if (det.confidence < 0.0 || det.confidence > 1.0)
      throw ParseError(fmt::format("confidence {} out of range [0,1]", f[5]), line);
    require_known(registry, det.label, line);
    out.push_back(det);
  });
  return out;
}

inline ClassRegistry parse_class_registry(std::string_view text) {
  using namespace yolo_detail;
  ClassRegistry reg;
  for_each_line(text, [&](std::size_t line, const std::vector<std::string_view>& f) {
    if (f.size() != 2)
      throw ParseError(fmt::format("expected '<id> <name>', found {} fields", f.size()), line);
    try {
      reg.add({parse_class(f[0], line), std::string(f[1])});
    } catch (const RegistryError& e) {
      throw RegistryError(fmt::format("line {}: {}", line, e.what()));
    }
  });
  return reg;
}

inline std::string serialize_yolo(const std::vector<GroundTruthObject>& objects) {
  std::string out;
  for (const auto& o : objects)
    out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f}\n", o.label, o.box.cx, o.box.cy,
                       o.box.w, o.box.h);
  return out;
}

inline std::string serialize_yolo(const std::vector<Detection>& dets) {
  std::string out;
  for (const auto& d : dets)
    out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f} {:.6f}\n", d.label, d.box.cx,
                       d.box.cy, d.box.w, d.box.h, d.confidence);
  return out;
}

inline std::string serialize_registry(const ClassRegistry& reg) {
  std::string out;
  for (const auto& l : reg.labels()) out += fmt::format("{} {}\n", l.id, l.name);
  return out;
}

}  // namespace detkit
