#pragma once

namespace gausshead {

/// Corner form of an axis-aligned box.
struct Corners {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  friend bool operator==(const Corners&, const Corners&) = default;
};

/// Axis-aligned box in center-size form. Coordinates are fractions of the
/// image width/height; pixel conversion only happens at I/O boundaries.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  [[nodiscard]] Corners corners() const noexcept {
    return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  }
  [[nodiscard]] double area() const noexcept { return w * h; }

  /// Throws ValidationError when x1 > x2 or y1 > y2.
  [[nodiscard]] static Box from_corners(const Corners& c);

  friend bool operator==(const Box&, const Box&) = default;
};

/// True when w, h are finite and non-negative.
[[nodiscard]] bool is_valid(const Box& b) noexcept;

/// Intersection over union. Degenerate (zero-area) inputs yield 0.
[[nodiscard]] double iou(const Box& a, const Box& b) noexcept;

/// IOU of two boxes placed with a shared top-left corner, i.e. a comparison of
/// shapes only. Used for anchor assignment and anchor clustering.
[[nodiscard]] double shape_iou(double w1, double h1, double w2, double h2) noexcept;

}  // namespace gausshead
