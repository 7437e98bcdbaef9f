#pragma once

#include <span>
#include <string>
#include <vector>

#include "gausshead/config.hpp"
#include "gausshead/geometry.hpp"

namespace gausshead {

/// Ground-truth object: class index and a box in image ratios.
struct GroundTruth {
  int class_id = 0;
  Box box;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

/// Throws ValidationError unless 0 < w <= 1, 0 < h <= 1, the center lies in
/// [0,1]^2 and (when classes > 0) 0 <= class_id < classes.
void validate_ground_truth(const GroundTruth& gt, int classes = 0);

struct CenterTarget {
  int i = 0;        ///< grid column
  int j = 0;        ///< grid row
  double tx = 0.0;  ///< offset inside the cell, [0, 1)
  double ty = 0.0;
};

struct SizeTarget {
  double tw = 0.0;  ///< log(w * IW / anchor w)
  double th = 0.0;
};

/// Regression target for one assigned (cell, anchor) slot.
struct EncodedTarget {
  int i = 0;
  int j = 0;
  int k = 0;
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
  double gamma = 0.0;  ///< loss weight omega_scale * delta / 2
  int class_id = 0;
  int delta = 0;       ///< assignment indicator, 1 for emitted targets

  friend bool operator==(const EncodedTarget&, const EncodedTarget&) = default;
};

/// Cell index and in-cell offset of the box center. A center at exactly 1.0
/// lands in the last cell with an offset just below 1.
[[nodiscard]] CenterTarget encode_center(const Box& gt, const GridSpec& grid);

/// Log size ratios against the anchor. Throws on non-positive w or h.
[[nodiscard]] SizeTarget encode_size(const Box& gt, const GridSpec& grid, const Anchor& anchor);

/// Index of the anchor with the largest shape IOU against the box in pixels;
/// ties go to the lowest index.
[[nodiscard]] int assign_anchor(const Box& gt, std::span<const Anchor> anchors,
                                const GridSpec& grid);

/// 2 - w*h: small boxes get larger weights.
[[nodiscard]] double scale_weight(const Box& gt) noexcept;

/// omega * delta / 2.
[[nodiscard]] double loss_weight(double omega, int delta) noexcept;

struct EncodeResult {
  std::vector<EncodedTarget> targets;
  /// One message per slot collision (a later GT replaced an earlier one).
  std::vector<std::string> warnings;
};

/// One target per GT. When two GTs claim the same (i, j, k) slot the later
/// GT wins and a warning is recorded.
[[nodiscard]] EncodeResult encode_targets(std::span<const GroundTruth> gts,
                                          const GridSpec& grid,
                                          std::span<const Anchor> anchors);

}  // namespace gausshead
