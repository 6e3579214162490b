#pragma once

#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/error.hpp"
#include "detkit/stats.hpp"

namespace detkit {

enum class Stratum { kTop, kMiddle, kBottom };

inline const char* to_string(Stratum s) {
  switch (s) {
    case Stratum::kTop: return "top";
    case Stratum::kMiddle: return "middle";
    case Stratum::kBottom: return "bottom";
  }
  return "?";
}

inline Stratum parse_stratum(const std::string& s) {
  if (s == "top") return Stratum::kTop;
  if (s == "middle") return Stratum::kMiddle;
  if (s == "bottom") return Stratum::kBottom;
  throw ParseError(fmt::format("unknown stratum '{}' (expected top, middle or bottom)", s), 0);
}

/// Bags placed at one plant height in one image and how many were detected.
struct HeightRecord {
  std::string image_id;
  Stratum stratum = Stratum::kTop;
  int placed = 0;
  int detected = 0;

  void validate() const {
    if (placed < 0 || detected < 0 || detected > placed)
      throw DomainError(fmt::format("height record {}/{}: need 0 <= detected ({}) <= placed ({})",
                                    image_id, to_string(stratum), detected, placed));
  }
};

struct BagAccuracy {
  Stratum stratum = Stratum::kTop;
  std::vector<std::string> image_ids;
  std::vector<double> percentages;  ///< 100 * detected / placed, per image
  double mean = 0.0;
  std::optional<double> sd;
  std::vector<std::string> warnings;
};

/// Per-image detection percentage for one stratum plus mean and sample SD.
/// Records with nothing placed are skipped and reported in `warnings`.
inline BagAccuracy bag_based_accuracy(const std::vector<HeightRecord>& records, Stratum stratum) {
  BagAccuracy out;
  out.stratum = stratum;
  for (const auto& r : records) {
    if (r.stratum != stratum) continue;
    r.validate();
    if (r.placed == 0) {
      out.warnings.push_back(fmt::format("image {}: no {} bags placed, excluded", r.image_id,
                                         to_string(stratum)));
      continue;
    }
    out.image_ids.push_back(r.image_id);
    out.percentages.push_back(100.0 * double(r.detected) / double(r.placed));
  }
  if (out.percentages.empty())
    throw DomainError(fmt::format("no usable records for stratum {}", to_string(stratum)));
  const auto d = describe(out.percentages);
  out.mean = d.mean;
  out.sd = d.sd;
  return out;
}

}  // namespace detkit
