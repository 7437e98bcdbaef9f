#pragma once

#include <span>
#include <vector>

#include "gausshead/config.hpp"
#include "gausshead/geometry.hpp"
#include "gausshead/head.hpp"

namespace gausshead {

struct Detection {
  int class_id = 0;
  double score = 0.0;  ///< objectness * class_score * (1 - uncertainty)
  Box box;
  double uncertainty = 0.0;
  double objectness = 0.0;
  double class_score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// obj * cls * (1 - uncertainty). With uncertainty 0 this is the plain
/// objectness-times-class score.
[[nodiscard]] constexpr double criterion(double obj, double cls, double uncertainty) noexcept {
  return obj * cls * (1.0 - uncertainty);
}

struct DetectOptions {
  double threshold = 0.5;       ///< emit when criterion > threshold
  bool use_uncertainty = true;  ///< false scores with uncertainty = 0 (still reported)
  bool all_classes = false;     ///< false: only the argmax class per slot
};

/// Scores every slot and keeps candidates above the threshold, sorted by
/// score descending with ties broken by (j, i, k, class) ascending.
[[nodiscard]] std::vector<Detection> extract_detections(const RawGrid& raw, const GridSpec& grid,
                                                        std::span<const Anchor> anchors,
                                                        const DetectOptions& opts = {});

/// Greedy class-wise suppression of detections overlapping a higher-scored
/// same-class survivor by IOU > iou_threshold. Input is stably re-sorted by
/// score; output is in score order.
[[nodiscard]] std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold = 0.45);

}  // namespace gausshead
