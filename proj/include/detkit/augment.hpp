#pragma once

// Bounding-box-aware augmentation. Only annotation geometry is transformed;
// pixel resampling is the caller's concern.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/annotations.hpp"
#include "detkit/error.hpp"
#include "detkit/rng.hpp"

namespace detkit {

enum class AugmentKind { kRotate, kFlipLeftRight, kFlipTopBottom, kZoomRandom };

inline const char* to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::kRotate: return "rotate";
    case AugmentKind::kFlipLeftRight: return "flip_left_right";
    case AugmentKind::kFlipTopBottom: return "flip_top_bottom";
    case AugmentKind::kZoomRandom: return "zoom_random";
  }
  return "?";
}

struct AugmentOp {
  AugmentKind kind = AugmentKind::kRotate;
  double probability = 0.0;
  /// rotate: angles drawn uniformly from this set (degrees, multiples of 90).
  std::vector<int> right_angles{90, 180, 270};
  /// rotate: when > 0, draw uniform(-max, max) degrees instead and replace each
  /// box by the axis-aligned envelope of its rotated corners.
  double free_rotation_max_deg = 0.0;
  /// zoom_random: fraction of the image area kept by the centered crop.
  double percentage_area = 0.8;
};

struct AugmentPipeline {
  std::vector<AugmentOp> ops;
  std::uint64_t rng_seed = 0;
  /// Boxes whose visible fraction drops below this after cropping are removed.
  double min_visibility = 0.3;

  void validate() const {
    for (const auto& op : ops) {
      if (!(op.probability >= 0.0 && op.probability <= 1.0))
        throw ConfigError(fmt::format("{} probability {} outside [0,1]", to_string(op.kind),
                                      op.probability));
      if (op.kind == AugmentKind::kZoomRandom &&
          !(op.percentage_area > 0.0 && op.percentage_area <= 1.0))
        throw ConfigError(fmt::format("percentage_area {} outside (0,1]", op.percentage_area));
      if (op.kind == AugmentKind::kRotate) {
        if (op.free_rotation_max_deg < 0.0)
          throw ConfigError("free rotation range must be non-negative");
        if (op.free_rotation_max_deg == 0.0) {
          if (op.right_angles.empty()) throw ConfigError("rotate needs at least one angle");
          for (int a : op.right_angles)
            if (a % 90 != 0) throw ConfigError(fmt::format("rotation angle {} is not a multiple of 90", a));
        }
      }
    }
    if (!(min_visibility >= 0.0 && min_visibility <= 1.0))
      throw ConfigError(fmt::format("min_visibility {} outside [0,1]", min_visibility));
  }
};

/// rotate 0.7, flip_left_right 0.4, zoom_random 0.4 (area 0.8), flip_top_bottom 0.4.
inline AugmentPipeline reference_pipeline(std::uint64_t seed) {
  AugmentPipeline p;
  p.rng_seed = seed;
  p.ops.push_back({AugmentKind::kRotate, 0.7});
  p.ops.push_back({AugmentKind::kFlipLeftRight, 0.4});
  p.ops.push_back({AugmentKind::kZoomRandom, 0.4, {}, 0.0, 0.8});
  p.ops.push_back({AugmentKind::kFlipTopBottom, 0.4});
  return p;
}

struct AugmentedSample {
  AnnotatedImage image;
  std::vector<std::string> applied;  ///< e.g. "rotate:90", "flip_left_right"
  bool discardable = false;
};

namespace augment_detail {

inline BoundingBox rotate_right_angle(const BoundingBox& b, int quarter_turns) {
  switch (((quarter_turns % 4) + 4) % 4) {
    case 1: return {1.0 - b.cy, b.cx, b.h, b.w};
    case 2: return {1.0 - b.cx, 1.0 - b.cy, b.w, b.h};
    case 3: return {b.cy, 1.0 - b.cx, b.h, b.w};
    default: return b;
  }
}

/// Envelope of the box corners rotated by `deg` about the image center, in
/// pixels, clipped to the (unchanged) image frame. Returns false if dropped.
inline bool rotate_free(const BoundingBox& b, double deg, double W, double H,
                        double min_visibility, BoundingBox& out) {
  const double th = deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  const PixelRect px = to_pixels(b, W, H);
  const double xs[4] = {px.x0, px.x1, px.x1, px.x0};
  const double ys[4] = {px.y0, px.y0, px.y1, px.y1};
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (int k = 0; k < 4; ++k) {
    const double dx = xs[k] - W / 2.0, dy = ys[k] - H / 2.0;
    const double rx = W / 2.0 + dx * c - dy * s;
    const double ry = H / 2.0 + dx * s + dy * c;
    x0 = std::min(x0, rx); x1 = std::max(x1, rx);
    y0 = std::min(y0, ry); y1 = std::max(y1, ry);
  }
  const PixelRect env{x0, y0, x1, y1};
  const PixelRect frame{0.0, 0.0, W, H};
  const double vis = intersection_area(env, frame);
  if (!(vis > 0.0) || vis / env.area() < min_visibility) return false;
  const PixelRect clip{std::max(x0, 0.0), std::max(y0, 0.0), std::min(x1, W), std::min(y1, H)};
  out = to_normalized(clip, W, H).clipped();
  return out.w > 0.0 && out.h > 0.0;
}

inline bool zoom_centered(const BoundingBox& b, double percentage_area, double min_visibility,
                          BoundingBox& out) {
  const double side = std::sqrt(percentage_area);
  const double lo = (1.0 - side) / 2.0;
  const double hi = (1.0 + side) / 2.0;
  const BoundingBox region = BoundingBox::from_corners(lo, lo, hi, hi);
  const double vis = intersection_area(b, region);
  if (!(vis > 0.0) || vis / b.area() < min_visibility) return false;
  const double x0 = (std::max(b.x_min(), lo) - lo) / side;
  const double x1 = (std::min(b.x_max(), hi) - lo) / side;
  const double y0 = (std::max(b.y_min(), lo) - lo) / side;
  const double y1 = (std::min(b.y_max(), hi) - lo) / side;
  out = BoundingBox::from_corners(x0, y0, x1, y1).clipped();
  return out.w > 0.0 && out.h > 0.0;
}

}  // namespace augment_detail

/// Applies the pipeline once. The random stream depends only on
/// (pipeline.rng_seed, sample_index), so samples can be generated in any order
/// or concurrently.
inline AugmentedSample augment_sample(const AnnotatedImage& image, const AugmentPipeline& pipeline,
                                      std::uint64_t sample_index) {
  using namespace augment_detail;
  Stream rng(pipeline.rng_seed, sample_index);
  AugmentedSample out;
  out.image = image;
  out.image.image_id = fmt::format("{}_aug{:05d}", image.image_id, sample_index);
  auto& objs = out.image.objects;

  for (const auto& op : pipeline.ops) {
    if (!rng.bernoulli(op.probability)) continue;
    switch (op.kind) {
      case AugmentKind::kFlipLeftRight:
        for (auto& o : objs) o.box.cx = 1.0 - o.box.cx;
        out.applied.emplace_back(to_string(op.kind));
        break;
      case AugmentKind::kFlipTopBottom:
        for (auto& o : objs) o.box.cy = 1.0 - o.box.cy;
        out.applied.emplace_back(to_string(op.kind));
        break;
      case AugmentKind::kRotate:
        if (op.free_rotation_max_deg > 0.0) {
          const double deg = rng.uniform(-op.free_rotation_max_deg, op.free_rotation_max_deg);
          std::vector<GroundTruthObject> kept;
          for (const auto& o : objs) {
            BoundingBox nb;
            if (rotate_free(o.box, deg, out.image.width_px, out.image.height_px,
                            pipeline.min_visibility, nb))
              kept.push_back({o.label, nb});
          }
          objs = std::move(kept);
          out.applied.push_back(fmt::format("rotate:{:.3f}", deg));
        } else {
          const int deg = op.right_angles[rng.below(op.right_angles.size())];
          const int quarter = deg / 90;
          for (auto& o : objs) o.box = rotate_right_angle(o.box, quarter);
          if (quarter % 2 != 0) std::swap(out.image.width_px, out.image.height_px);
          out.applied.push_back(fmt::format("rotate:{}", deg));
        }
        break;
      case AugmentKind::kZoomRandom: {
        std::vector<GroundTruthObject> kept;
        for (const auto& o : objs) {
          BoundingBox nb;
          if (zoom_centered(o.box, op.percentage_area, pipeline.min_visibility, nb))
            kept.push_back({o.label, nb});
        }
        objs = std::move(kept);
        out.applied.emplace_back(to_string(op.kind));
        break;
      }
    }
  }
  out.discardable = objs.empty();
  return out;
}

inline std::vector<AnnotatedImage> augment(const AnnotatedImage& image,
                                           const AugmentPipeline& pipeline, int sample_count) {
  pipeline.validate();
  if (sample_count < 0) throw DomainError("sample_count must be non-negative");
  std::vector<AnnotatedImage> out;
  out.reserve(sample_count);
  for (int i = 0; i < sample_count; ++i)
    out.push_back(augment_sample(image, pipeline, std::uint64_t(i)).image);
  return out;
}

}  // namespace detkit
