#include "gausshead/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <ostream>
#include <thread>

#include "gausshead/error.hpp"
#include "gausshead/io.hpp"
#include "gausshead/rng.hpp"

namespace gausshead {

void TrainConfig::validate() const {
  if (!(lr >= 0) || !std::isfinite(lr)) throw ValidationError("train.lr: must be >= 0");
  if (batch < 1) throw ValidationError("train.batch: must be >= 1");
  if (epochs < 0) throw ValidationError("train.epochs: must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw ValidationError("train.momentum: must be in [0, 1)");
  if (!(clip_norm >= 0)) throw ValidationError("train.clip_norm: must be >= 0");
  if (threads < 1) throw ValidationError("train.threads: must be >= 1");
  loss.validate();
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  {
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        const int begin = n * t / threads;
        const int end = n * (t + 1) / threads;
        try {
          for (int i = begin; i < end; ++i) fn(i);
        } catch (...) {
          errors[static_cast<std::size_t>(t)] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SampleGradient sample_gradient(const ToyModel& model, const Image& image,
                               std::span<const GroundTruth> labels, const LossConfig& loss) {
  const ModelConfig& cfg = model.config();
  ToyModel::Cache cache;
  const RawGrid raw = model.forward(image, &cache);
  const EncodeResult enc = encode_targets(labels, cfg.grid, cfg.anchors);
  LossConfig lc = loss;
  lc.box_loss = model.mode() == HeadMode::kGaussian ? BoxLoss::kGaussianNll : BoxLoss::kSquaredError;
  const LossResult lr = total_loss(raw, enc.targets, labels, cfg.grid, cfg.anchors, lc);
  SampleGradient out;
  out.loss = lr.breakdown;
  out.grad.assign(model.parameter_count(), 0.0);
  model.backward(cache, lr.grad, out.grad);
  return out;
}

std::vector<EpochLog> train(ToyModel& model, const Dataset& data, const TrainConfig& cfg,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  const std::size_t n_params = model.parameter_count();
  const int n = static_cast<int>(data.samples.size());
  std::vector<double> velocity(n_params, 0.0);
  std::vector<double> grad(n_params);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(child_seed(cfg.seed, "train/shuffle"));
  std::vector<EpochLog> log;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(uniform_int(rng, 0, i))]);
    }
    LossBreakdown epoch_sum;
    int batch_index = 0;
    for (int start = 0; start < n; start += cfg.batch, ++batch_index) {
      const int count = std::min(cfg.batch, n - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      LossBreakdown batch_sum;

      if (cfg.threads == 1) {
        for (int b = 0; b < count; ++b) {
          const Sample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
          const SampleGradient sg = sample_gradient(model, s.image, s.labels, cfg.loss);
          batch_sum += sg.loss;
          for (std::size_t p = 0; p < n_params; ++p) grad[p] += sg.grad[p];
        }
      } else if (cfg.deterministic) {
        std::vector<SampleGradient> per(static_cast<std::size_t>(count));
        parallel_for(count, cfg.threads, [&](int b) {
          const Sample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
          per[static_cast<std::size_t>(b)] = sample_gradient(model, s.image, s.labels, cfg.loss);
        });
        for (const SampleGradient& sg : per) {
          batch_sum += sg.loss;
          for (std::size_t p = 0; p < n_params; ++p) grad[p] += sg.grad[p];
        }
      } else {
        const int threads = std::min(cfg.threads, count);
        std::vector<std::vector<double>> partial(static_cast<std::size_t>(threads),
                                                 std::vector<double>(n_params, 0.0));
        std::vector<LossBreakdown> partial_loss(static_cast<std::size_t>(threads));
        parallel_for(threads, threads, [&](int t) {
          for (int b = count * t / threads; b < count * (t + 1) / threads; ++b) {
            const Sample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
            const SampleGradient sg = sample_gradient(model, s.image, s.labels, cfg.loss);
            partial_loss[static_cast<std::size_t>(t)] += sg.loss;
            auto& acc = partial[static_cast<std::size_t>(t)];
            for (std::size_t p = 0; p < n_params; ++p) acc[p] += sg.grad[p];
          }
        });
        for (int t = 0; t < threads; ++t) {
          batch_sum += partial_loss[static_cast<std::size_t>(t)];
          for (std::size_t p = 0; p < n_params; ++p) grad[p] += partial[static_cast<std::size_t>(t)][p];
        }
      }

      if (!std::isfinite(batch_sum.total)) {
        throw DivergenceError("training diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                              " (images " + std::to_string(start) + ".." +
                              std::to_string(start + count - 1) + " of the shuffled order)");
      }
      epoch_sum += batch_sum;

      const double inv = 1.0 / count;
      double norm2 = 0.0;
      for (double& g : grad) {
        g *= inv;
        norm2 += g * g;
      }
      double scale = 1.0;
      if (cfg.clip_norm > 0) {
        const double norm = std::sqrt(norm2);
        if (norm > cfg.clip_norm) scale = cfg.clip_norm / norm;
      }
      auto params = model.parameters();
      for (std::size_t p = 0; p < n_params; ++p) {
        velocity[p] = cfg.momentum * velocity[p] + scale * grad[p];
        params[p] -= cfg.lr * velocity[p];
      }
    }
    EpochLog entry{epoch, n > 0 ? epoch_sum.scaled(1.0 / n) : LossBreakdown{}};
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

void write_train_log(std::ostream& out, const std::vector<EpochLog>& log) {
  out << "epoch,lx,ly,lw,lh,l_obj,l_class,total\n";
  for (const EpochLog& e : log) {
    const LossBreakdown& m = e.mean;
    out << e.epoch << ',' << format_double(m.lx) << ',' << format_double(m.ly) << ','
        << format_double(m.lw) << ',' << format_double(m.lh) << ',' << format_double(m.l_obj)
        << ',' << format_double(m.l_class) << ',' << format_double(m.total) << '\n';
  }
}

DetectionSet detect_dataset(const ToyModel& model, const Dataset& data,
                            const InferenceOptions& opts, int threads) {
  const ModelConfig& cfg = model.config();
  DetectOptions detect = opts.detect;
  if (model.mode() == HeadMode::kDeterministic) detect.use_uncertainty = false;
  std::vector<std::vector<Detection>> per(data.samples.size());
  parallel_for(static_cast<int>(data.samples.size()), threads, [&](int n) {
    const RawGrid raw = model.forward(data.samples[static_cast<std::size_t>(n)].image);
    per[static_cast<std::size_t>(n)] =
        nms(extract_detections(raw, cfg.grid, cfg.anchors, detect), opts.nms_iou);
  });
  DetectionSet out;
  for (std::size_t n = 0; n < per.size(); ++n) {
    if (!per[n].empty()) out[data.samples[n].image_id] = std::move(per[n]);
  }
  return out;
}

}  // namespace gausshead
