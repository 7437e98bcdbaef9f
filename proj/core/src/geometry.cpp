#include "gausshead/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gausshead/error.hpp"

namespace gausshead {

Box Box::from_corners(const Corners& c) {
  if (!(c.x1 <= c.x2)) {
    throw ValidationError("from_corners: x1 (" + std::to_string(c.x1) + ") > x2 (" +
                          std::to_string(c.x2) + ")");
  }
  if (!(c.y1 <= c.y2)) {
    throw ValidationError("from_corners: y1 (" + std::to_string(c.y1) + ") > y2 (" +
                          std::to_string(c.y2) + ")");
  }
  return {(c.x1 + c.x2) / 2, (c.y1 + c.y2) / 2, c.x2 - c.x1, c.y2 - c.y1};
}

bool is_valid(const Box& b) noexcept {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) &&
         std::isfinite(b.h) && b.w >= 0 && b.h >= 0;
}

double iou(const Box& a, const Box& b) noexcept {
  const Corners ca = a.corners();
  const Corners cb = b.corners();
  const double iw = std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1);
  const double ih = std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double shape_iou(double w1, double h1, double w2, double h2) noexcept {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  if (inter <= 0) return 0.0;
  const double uni = w1 * h1 + w2 * h2 - inter;
  if (uni <= 0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace gausshead
