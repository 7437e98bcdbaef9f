#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gausshead/encoding.hpp"
#include "gausshead/inference.hpp"

namespace gausshead {

struct EvalConfig {
  std::map<int, double> class_iou;  ///< per-class IOU thresholds
  double default_iou = 0.5;         ///< for classes not in class_iou
  double score_threshold = 0.5;     ///< FP/TP counting threshold
  bool eleven_point = false;        ///< 11-point instead of all-point AP

  [[nodiscard]] double iou_threshold(int class_id) const;
  void validate() const;
};

/// Outcome for one detection under greedy matching.
struct DetectionMatch {
  bool tp = false;
  int gt_index = -1;  ///< matched GT when tp, otherwise the best unmatched candidate or -1
  double iou = 0.0;   ///< IOU with gt_index
};

/// Greedy matching in (score desc, box lexicographic, class) order: each
/// detection takes the highest-IOU unmatched same-class GT and is a TP when
/// that IOU reaches the class threshold. No score filtering is applied.
/// Results are aligned with the input order of `dets`.
[[nodiscard]] std::vector<DetectionMatch> match_detections(std::span<const Detection> dets,
                                                           std::span<const GroundTruth> gts,
                                                           const EvalConfig& cfg);

struct ClassCounts {
  int fp = 0;
  int tp = 0;
  int gt = 0;

  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct MatchReport {
  int fp = 0;
  int tp = 0;
  int gt = 0;
  std::map<int, ClassCounts> per_class;

  MatchReport& operator+=(const MatchReport& o);
  friend bool operator==(const MatchReport&, const MatchReport&) = default;
};

/// FP/TP/GT counts for one image over detections with score >= score_threshold.
[[nodiscard]] MatchReport match_image(std::span<const Detection> dets,
                                      std::span<const GroundTruth> gts, const EvalConfig& cfg);

using DetectionSet = std::map<std::string, std::vector<Detection>>;
using AnnotationSet = std::map<std::string, std::vector<GroundTruth>>;

struct PrPoint {
  double score = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct ApResult {
  std::optional<double> ap;  ///< empty when the class has no ground truth
  int gt = 0;
  std::vector<PrPoint> curve;
};

/// AP of one class over all images; the score threshold is not applied.
[[nodiscard]] ApResult average_precision(const DetectionSet& dets, const AnnotationSet& gts,
                                         int class_id, const EvalConfig& cfg);

struct ClassReport {
  int class_id = 0;
  std::optional<double> ap;
  ClassCounts counts;
  std::vector<PrPoint> curve;
};

struct MapReport {
  double map = 0.0;  ///< unweighted mean over classes with a defined AP
  std::vector<ClassReport> per_class;
  std::vector<std::string> notices;
  MatchReport counts;  ///< at score_threshold, summed over images
};

/// Evaluates classes 0..classes-1 plus any class id present in the data.
[[nodiscard]] MapReport evaluate_map(const DetectionSet& dets, const AnnotationSet& gts,
                                     const EvalConfig& cfg, int classes = 0);

}  // namespace gausshead
