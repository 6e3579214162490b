#pragma once

#include <string>
#include <vector>

#include <fmt/format.h>

#include "detkit/annotations.hpp"
#include "detkit/error.hpp"
#include "detkit/geometry.hpp"

namespace detkit {

enum class EdgePolicy {
  kAnchorToEdge,  ///< last row/column shifted inward; tiles may overlap
  kPad,           ///< regular grid; last row/column extends past the image
};

struct TileSpec {
  int tile_w = 416;
  int tile_h = 416;
  EdgePolicy edge_policy = EdgePolicy::kAnchorToEdge;
  double min_visibility = 0.3;

  void validate() const {
    if (tile_w <= 0 || tile_h <= 0)
      throw ConfigError(fmt::format("tile size must be positive, got {}x{}", tile_w, tile_h));
    if (!(min_visibility >= 0.0 && min_visibility <= 1.0))
      throw ConfigError(fmt::format("min_visibility {} outside [0,1]", min_visibility));
  }
};

/// Tile rectangle in source-image pixels.
struct TileRect {
  int x0 = 0;
  int y0 = 0;
  int w = 0;
  int h = 0;

  PixelRect rect() const { return {double(x0), double(y0), double(x0 + w), double(y0 + h)}; }
  friend bool operator==(const TileRect&, const TileRect&) = default;
};

namespace tiling_detail {

inline std::vector<int> axis_origins(int extent, int tile, EdgePolicy policy) {
  const int count = (extent + tile - 1) / tile;
  std::vector<int> origins;
  origins.reserve(count);
  for (int i = 0; i < count; ++i) {
    int o = i * tile;
    if (policy == EdgePolicy::kAnchorToEdge && o + tile > extent) o = extent - tile;
    origins.push_back(o);
  }
  return origins;
}

}  // namespace tiling_detail

/// Row-major grid of ceil(W/tw) x ceil(H/th) tiles covering the image.
inline std::vector<TileRect> plan_tiles(int img_w, int img_h, const TileSpec& spec) {
  spec.validate();
  if (img_w < spec.tile_w || img_h < spec.tile_h)
    throw DomainError(fmt::format("image {}x{} is smaller than tile {}x{}", img_w, img_h,
                                  spec.tile_w, spec.tile_h));
  const auto xs = tiling_detail::axis_origins(img_w, spec.tile_w, spec.edge_policy);
  const auto ys = tiling_detail::axis_origins(img_h, spec.tile_h, spec.edge_policy);
  std::vector<TileRect> tiles;
  tiles.reserve(xs.size() * ys.size());
  for (int y : ys)
    for (int x : xs) tiles.push_back({x, y, spec.tile_w, spec.tile_h});
  return tiles;
}

struct TileAnnotation {
  TileRect tile;
  AnnotatedImage image;  ///< boxes normalized to the tile
  bool discardable = false;  ///< no object survived clipping
};

/// Clips every ground-truth box to each tile it overlaps and re-expresses it in
/// tile-normalized coordinates. A clipped box is kept when its visible area is
/// at least `min_visibility` of the original area.
inline std::vector<TileAnnotation> retile_annotations(const AnnotatedImage& image,
                                                      const std::vector<TileRect>& tiles,
                                                      const TileSpec& spec) {
  spec.validate();
  const double W = image.width_px;
  const double H = image.height_px;
  std::vector<TileAnnotation> out;
  out.reserve(tiles.size());
  for (std::size_t t = 0; t < tiles.size(); ++t) {
    const TileRect& tile = tiles[t];
    const PixelRect tr = tile.rect();
    TileAnnotation ta;
    ta.tile = tile;
    ta.image.image_id = fmt::format("{}_t{:03d}", image.image_id, t);
    ta.image.width_px = tile.w;
    ta.image.height_px = tile.h;
    for (const auto& obj : image.objects) {
      const PixelRect px = to_pixels(obj.box, W, H);
      const double full = px.area();
      const double inter = intersection_area(px, tr);
      if (!(inter > 0.0) || !(full > 0.0)) continue;
      if (inter / full < spec.min_visibility) continue;
      const PixelRect clipped{std::max(px.x0, tr.x0) - tile.x0, std::max(px.y0, tr.y0) - tile.y0,
                              std::min(px.x1, tr.x1) - tile.x0, std::min(px.y1, tr.y1) - tile.y0};
      BoundingBox nb = to_normalized(clipped, tile.w, tile.h).clipped();
      if (!(nb.w > 0.0) || !(nb.h > 0.0)) continue;
      ta.image.objects.push_back({obj.label, nb});
    }
    ta.discardable = ta.image.objects.empty();
    out.push_back(std::move(ta));
  }
  return out;
}

}  // namespace detkit
