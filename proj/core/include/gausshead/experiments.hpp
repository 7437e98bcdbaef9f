#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "gausshead/eval.hpp"
#include "gausshead/model.hpp"
#include "gausshead/scene.hpp"
#include "gausshead/train.hpp"

namespace gausshead {

struct IouBin {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
  std::optional<double> mean_uncertainty;  ///< empty when count == 0
};

/// Bins (iou, uncertainty) pairs into [k*width, (k+1)*width); IOU 1 falls in
/// the last bin. All bins are returned, empty ones without a mean.
[[nodiscard]] std::vector<IouBin> bin_by_iou(std::span<const double> iou,
                                             std::span<const double> uncertainty,
                                             double width = 0.1);

/// Spearman rank correlation with average ranks for ties. Empty when either
/// side has zero rank variance or fewer than two points.
[[nodiscard]] std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct IouExperimentOptions {
  InferenceOptions inference;  ///< uncertainty is not used for filtering by default
  double match_iou = 0.5;
  int min_tp = 50;
  int threads = 1;

  IouExperimentOptions() { inference.detect.use_uncertainty = false; }
};

struct IouExperimentReport {
  std::vector<IouBin> bins;
  std::optional<double> spearman;
  int tp = 0;
  std::vector<double> tp_iou;
  std::vector<double> tp_uncertainty;
};

/// Matches detections of a Gaussian model against `data` labels and relates
/// TP IOU to predicted uncertainty. Throws ValidationError for a
/// deterministic model and Error when fewer than min_tp TPs are found.
[[nodiscard]] IouExperimentReport experiment_iou_vs_uncertainty(const ToyModel& model,
                                                                const Dataset& data,
                                                                const IouExperimentOptions& opts);

/// Pure part of the above, from detections and annotations.
[[nodiscard]] IouExperimentReport iou_vs_uncertainty(const DetectionSet& dets,
                                                     const AnnotationSet& gts, double match_iou,
                                                     int min_tp);

/// CSV: bin_lo,bin_hi,count,mean_uncertainty (empty bins leave the mean blank)
/// followed by a trailing "# spearman,<value>" line.
void write_iou_report(std::ostream& out, const IouExperimentReport& report);

/// Everything needed to train and evaluate one toy run.
struct ToySetup {
  ModelConfig model;
  BackboneSpec backbone;
  SceneSpec scene;  ///< seed and noise_prob are overridden per run
  int train_images = 2000;
  int val_images = 500;
  TrainConfig train;
  InferenceOptions inference;  ///< its threshold is replaced by ap_threshold
  EvalConfig eval;             ///< FP/TP are counted at eval.score_threshold
  double ap_threshold = 0.005; ///< extraction threshold, low so AP sweeps nearly all scores

  void validate() const;
};

/// Model config whose anchors are clustered from a generated sample of
/// `scene` boxes: grid cells = image / 2^pools, K anchors, C = scene.classes.
[[nodiscard]] ModelConfig toy_model_config(const SceneSpec& scene, int grid, int anchors,
                                           std::uint64_t seed);

/// Trains one model on a dataset generated from `setup.scene` with the given
/// noise probability and seed. Child seeds: "data/train", "model", "train".
[[nodiscard]] ToyModel train_toy(const ToySetup& setup, HeadMode mode, double noise_prob,
                                 std::uint64_t seed, std::vector<EpochLog>* log = nullptr);

/// Clean validation set for a seed (child seed "data/val", no label noise).
[[nodiscard]] Dataset toy_validation(const ToySetup& setup, std::uint64_t seed);

struct NoiseRow {
  HeadMode mode = HeadMode::kGaussian;
  std::uint64_t seed = 0;
  double map = 0.0;
  int fp = 0;
  int tp = 0;
};

struct ModeSummary {
  HeadMode mode = HeadMode::kGaussian;
  double mean_map = 0.0;
  double ci95 = 0.0;  ///< half-width, Student t over seeds
  double mean_fp = 0.0;
};

struct NoiseReport {
  std::vector<NoiseRow> rows;  ///< seed-major, Gaussian then deterministic
  std::vector<ModeSummary> summary;
  int seeds_with_fewer_gaussian_fp = 0;
};

/// Trains both head modes per seed on identical noisy data and evaluates on a
/// clean validation set. Gaussian detections use the uncertainty-aware
/// criterion; deterministic ones use obj * cls. AP is computed over all
/// detections above ap_threshold. Requires >= 2 seeds.
[[nodiscard]] NoiseReport experiment_noise_robustness(const ToySetup& setup, double noise_prob,
                                                      std::span<const std::uint64_t> seeds);

/// Summary statistics over rows; exposed for tests.
[[nodiscard]] NoiseReport summarize_noise(std::vector<NoiseRow> rows);

/// CSV: mode,seed,map,fp,tp
void write_noise_rows(std::ostream& out, const NoiseReport& report);
/// CSV: mode,mean_map,ci95,mean_fp
void write_noise_summary(std::ostream& out, const NoiseReport& report);

}  // namespace gausshead
