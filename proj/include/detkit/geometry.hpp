#pragma once

#include <algorithm>
#include <concepts>

namespace detkit {

/// Any axis-aligned rectangle exposing its extents. Both normalized
/// (`BoundingBox`) and pixel-space (`PixelRect`) boxes model this, so the
/// overlap measures below work in either frame.
template <typename B>
concept AxisAlignedBox = requires(const B& b) {
  { b.x_min() } -> std::convertible_to<double>;
  { b.x_max() } -> std::convertible_to<double>;
  { b.y_min() } -> std::convertible_to<double>;
  { b.y_max() } -> std::convertible_to<double>;
};

/// Box in normalized YOLO form: center and size as fractions of the image.
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  constexpr double x_min() const { return cx - w / 2.0; }
  constexpr double x_max() const { return cx + w / 2.0; }
  constexpr double y_min() const { return cy - h / 2.0; }
  constexpr double y_max() const { return cy + h / 2.0; }
  constexpr double area() const { return w * h; }

  static constexpr BoundingBox from_corners(double x0, double y0, double x1,
                                            double y1) {
    return {(x0 + x1) / 2.0, (y0 + y1) / 2.0, x1 - x0, y1 - y0};
  }

  /// 0 <= cx, cy <= 1 and 0 < w, h <= 1.
  constexpr bool valid() const {
    return cx >= 0.0 && cx <= 1.0 && cy >= 0.0 && cy <= 1.0 && w > 0.0 &&
           w <= 1.0 && h > 0.0 && h <= 1.0;
  }

  /// Clamps the extents to the unit square. May produce a zero-area box if the
  /// input lies entirely outside.
  constexpr BoundingBox clipped() const {
    const double x0 = std::clamp(x_min(), 0.0, 1.0);
    const double x1 = std::clamp(x_max(), 0.0, 1.0);
    const double y0 = std::clamp(y_min(), 0.0, 1.0);
    const double y1 = std::clamp(y_max(), 0.0, 1.0);
    return from_corners(x0, y0, x1, y1);
  }

  friend constexpr bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Corner-form rectangle in pixel (or any absolute) coordinates.
struct PixelRect {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  constexpr double x_min() const { return x0; }
  constexpr double x_max() const { return x1; }
  constexpr double y_min() const { return y0; }
  constexpr double y_max() const { return y1; }
  constexpr double width() const { return x1 - x0; }
  constexpr double height() const { return y1 - y0; }
  constexpr double area() const { return width() * height(); }

  friend constexpr bool operator==(const PixelRect&, const PixelRect&) = default;
};

template <AxisAlignedBox B>
constexpr double box_area(const B& b) {
  return std::max(0.0, double(b.x_max()) - b.x_min()) *
         std::max(0.0, double(b.y_max()) - b.y_min());
}

template <AxisAlignedBox A, AxisAlignedBox B>
constexpr double intersection_area(const A& a, const B& b) {
  const double iw = std::min<double>(a.x_max(), b.x_max()) -
                    std::max<double>(a.x_min(), b.x_min());
  const double ih = std::min<double>(a.y_max(), b.y_max()) -
                    std::max<double>(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

/// Intersection over union. A zero-area union yields 0.
template <AxisAlignedBox A, AxisAlignedBox B>
constexpr double iou(const A& a, const B& b) {
  const double inter = intersection_area(a, b);
  const double uni = box_area(a) + box_area(b) - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Generalized IoU: IoU minus the share of the smallest enclosing box that the
/// union leaves empty. Lies in (-1, 1]; equals IoU when one box contains the
/// other.
template <AxisAlignedBox A, AxisAlignedBox B>
constexpr double giou(const A& a, const B& b) {
  const double inter = intersection_area(a, b);
  const double uni = box_area(a) + box_area(b) - inter;
  const double ew = std::max<double>(a.x_max(), b.x_max()) -
                    std::min<double>(a.x_min(), b.x_min());
  const double eh = std::max<double>(a.y_max(), b.y_max()) -
                    std::min<double>(a.y_min(), b.y_min());
  const double enclosing = ew * eh;
  if (!(uni > 0.0) || !(enclosing > 0.0)) return 0.0;
  const double ratio = std::clamp(inter / uni, 0.0, 1.0);
  return ratio - std::max(0.0, enclosing - uni) / enclosing;
}

}  // namespace detkit
