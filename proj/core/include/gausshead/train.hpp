#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "gausshead/encoding.hpp"
#include "gausshead/eval.hpp"
#include "gausshead/inference.hpp"
#include "gausshead/loss.hpp"
#include "gausshead/model.hpp"
#include "gausshead/scene.hpp"

namespace gausshead {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 16;
  int epochs = 10;
  double momentum = 0.0;   ///< 0 is plain SGD
  double clip_norm = 0.0;  ///< global gradient-norm clip; 0 disables
  std::uint64_t seed = 0;  ///< shuffling
  int threads = 1;
  bool deterministic = true;  ///< fixed-order gradient reduction
  LossConfig loss;            ///< box_loss is set from the model's mode

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  LossBreakdown mean;  ///< mean per-image loss over the epoch
};

/// Loss and parameter gradient for one image (per-image sum of all terms).
struct SampleGradient {
  LossBreakdown loss;
  std::vector<double> grad;
};

/// Encodes `labels`, runs forward, total_loss and backward.
[[nodiscard]] SampleGradient sample_gradient(const ToyModel& model, const Image& image,
                                             std::span<const GroundTruth> labels,
                                             const LossConfig& loss);

/// Mini-batch SGD. Per-image losses are summed over slots; the batch loss is
/// the mean over images. Throws DivergenceError naming the epoch and batch if
/// a batch loss is non-finite. `on_epoch` is called after every epoch.
std::vector<EpochLog> train(ToyModel& model, const Dataset& data, const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Training log as CSV: epoch,lx,ly,lw,lh,l_obj,l_class,total.
void write_train_log(std::ostream& out, const std::vector<EpochLog>& log);

struct InferenceOptions {
  DetectOptions detect;
  double nms_iou = 0.45;
};

/// Runs the model over every sample: extract_detections then nms. The
/// uncertainty term is used only for Gaussian models.
[[nodiscard]] DetectionSet detect_dataset(const ToyModel& model, const Dataset& data,
                                          const InferenceOptions& opts, int threads = 1);

/// Runs `fn(index)` for index in [0, n) on up to `threads` threads. Each
/// thread processes a contiguous block.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace gausshead
