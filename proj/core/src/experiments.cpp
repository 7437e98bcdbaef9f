#include "gausshead/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include <boost/math/distributions/students_t.hpp>

#include "gausshead/error.hpp"
#include "gausshead/io.hpp"
#include "gausshead/rng.hpp"

namespace gausshead {

std::vector<IouBin> bin_by_iou(std::span<const double> iou, std::span<const double> uncertainty,
                               double width) {
  if (iou.size() != uncertainty.size()) throw ValidationError("bin_by_iou: size mismatch");
  if (!(width > 0 && width <= 1)) throw ValidationError("bin_by_iou: width must be in (0, 1]");
  const int n_bins = static_cast<int>(std::ceil(1.0 / width - 1e-9));
  std::vector<IouBin> bins(static_cast<std::size_t>(n_bins));
  std::vector<double> sums(bins.size(), 0.0);
  const double per_unit = 1.0 / width;
  for (int b = 0; b < n_bins; ++b) {
    bins[static_cast<std::size_t>(b)].lo = b / per_unit;
    bins[static_cast<std::size_t>(b)].hi = std::min(1.0, (b + 1) / per_unit);
  }
  for (std::size_t n = 0; n < iou.size(); ++n) {
    int b = static_cast<int>(std::floor(iou[n] / width + 1e-12));
    b = std::clamp(b, 0, n_bins - 1);
    ++bins[static_cast<std::size_t>(b)].count;
    sums[static_cast<std::size_t>(b)] += uncertainty[n];
  }
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (bins[b].count > 0) bins[b].mean_uncertainty = sums[b] / bins[b].count;
  }
  return bins;
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("spearman: size mismatch");
  if (a.size() < 2) return std::nullopt;
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

IouExperimentReport iou_vs_uncertainty(const DetectionSet& dets, const AnnotationSet& gts,
                                       double match_iou, int min_tp) {
  EvalConfig cfg;
  cfg.default_iou = match_iou;
  cfg.validate();
  IouExperimentReport report;
  for (const auto& [image_id, image_dets] : dets) {
    const auto it = gts.find(image_id);
    if (it == gts.end()) continue;
    const auto matches = match_detections(image_dets, it->second, cfg);
    for (std::size_t n = 0; n < matches.size(); ++n) {
      if (!matches[n].tp) continue;
      report.tp_iou.push_back(matches[n].iou);
      report.tp_uncertainty.push_back(image_dets[n].uncertainty);
    }
  }
  report.tp = static_cast<int>(report.tp_iou.size());
  if (report.tp < min_tp) {
    throw Error("experiment-iou: only " + std::to_string(report.tp) +
                " true positives, need at least " + std::to_string(min_tp));
  }
  report.bins = bin_by_iou(report.tp_iou, report.tp_uncertainty);
  report.spearman = spearman(report.tp_iou, report.tp_uncertainty);
  return report;
}

IouExperimentReport experiment_iou_vs_uncertainty(const ToyModel& model, const Dataset& data,
                                                  const IouExperimentOptions& opts) {
  if (model.mode() != HeadMode::kGaussian) {
    throw ValidationError("experiment-iou: model must be in gaussian mode");
  }
  const DetectionSet dets = detect_dataset(model, data, opts.inference, opts.threads);
  return iou_vs_uncertainty(dets, data.annotations(), opts.match_iou, opts.min_tp);
}

void write_iou_report(std::ostream& out, const IouExperimentReport& report) {
  out << "bin_lo,bin_hi,count,mean_uncertainty\n";
  for (const IouBin& b : report.bins) {
    out << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ',';
    if (b.mean_uncertainty) out << format_double(*b.mean_uncertainty);
    out << '\n';
  }
  out << "# spearman," << (report.spearman ? format_double(*report.spearman) : "") << '\n';
  out << "# tp," << report.tp << '\n';
}

void ToySetup::validate() const {
  model.validate();
  scene.validate();
  train.validate();
  eval.validate();
  if (scene.classes != model.grid.classes) {
    throw ValidationError("scene.classes: must equal model C");
  }
  if (scene.image_size != model.grid.image_width || scene.image_size != model.grid.image_height) {
    throw ValidationError("scene.image_size: must equal model IW and IH");
  }
  if (!(ap_threshold >= 0 && ap_threshold < 1)) throw ValidationError("ap_threshold: must be in [0, 1)");
  if (train_images < 1) throw ValidationError("train_images: must be >= 1");
  if (val_images < 1) throw ValidationError("val_images: must be >= 1");
}

ModelConfig toy_model_config(const SceneSpec& scene, int grid, int anchors, std::uint64_t seed) {
  scene.validate();
  SceneSpec s = scene;
  s.noise_prob = 0.0;
  s.seed = child_seed(seed, "anchors/data");
  const Dataset sample = gen_dataset(s, 300);
  std::vector<Box> boxes;
  for (const Sample& smp : sample.samples) {
    for (const GroundTruth& g : smp.rendered) boxes.push_back(g.box);
  }
  KmeansOptions ko;
  ko.k = anchors;
  ko.image_width = scene.image_size;
  ko.image_height = scene.image_size;
  ko.seed = child_seed(seed, "anchors");
  ModelConfig cfg;
  cfg.grid = GridSpec{grid, grid, anchors, scene.classes, scene.image_size, scene.image_size};
  cfg.anchors = kmeans_anchors(boxes, ko).anchors;
  for (int c = 0; c < scene.classes; ++c) cfg.class_names.push_back("class" + std::to_string(c));
  cfg.validate();
  return cfg;
}

ToyModel train_toy(const ToySetup& setup, HeadMode mode, double noise_prob, std::uint64_t seed,
                   std::vector<EpochLog>* log) {
  setup.validate();
  SceneSpec s = setup.scene;
  s.noise_prob = noise_prob;
  s.seed = child_seed(seed, "data/train");
  const Dataset train_set = gen_dataset(s, setup.train_images);
  ToyModel model(setup.model, mode, setup.backbone, child_seed(seed, "model"));
  TrainConfig tc = setup.train;
  tc.seed = child_seed(seed, "train");
  auto entries = train(model, train_set, tc);
  if (log) *log = std::move(entries);
  return model;
}

Dataset toy_validation(const ToySetup& setup, std::uint64_t seed) {
  SceneSpec s = setup.scene;
  s.noise_prob = 0.0;
  s.seed = child_seed(seed, "data/val");
  return gen_dataset(s, setup.val_images);
}

NoiseReport experiment_noise_robustness(const ToySetup& setup, double noise_prob,
                                        std::span<const std::uint64_t> seeds) {
  setup.validate();
  if (seeds.size() < 2) throw ValidationError("seeds: need at least 2 for a confidence interval");
  InferenceOptions inference = setup.inference;
  inference.detect.threshold = setup.ap_threshold;
  std::vector<NoiseRow> rows;
  for (const std::uint64_t seed : seeds) {
    const Dataset val = toy_validation(setup, seed);
    const AnnotationSet gts = val.annotations();
    for (const HeadMode mode : {HeadMode::kGaussian, HeadMode::kDeterministic}) {
      const ToyModel model = train_toy(setup, mode, noise_prob, seed);
      const DetectionSet dets = detect_dataset(model, val, inference, setup.train.threads);
      const MapReport rep = evaluate_map(dets, gts, setup.eval, setup.model.grid.classes);
      rows.push_back({mode, seed, rep.map, rep.counts.fp, rep.counts.tp});
    }
  }
  return summarize_noise(std::move(rows));
}

NoiseReport summarize_noise(std::vector<NoiseRow> rows) {
  NoiseReport report;
  report.rows = std::move(rows);
  for (const HeadMode mode : {HeadMode::kGaussian, HeadMode::kDeterministic}) {
    std::vector<double> maps;
    double fp = 0.0;
    for (const NoiseRow& r : report.rows) {
      if (r.mode != mode) continue;
      maps.push_back(r.map);
      fp += r.fp;
    }
    if (maps.empty()) continue;
    ModeSummary s;
    s.mode = mode;
    const double n = static_cast<double>(maps.size());
    s.mean_map = std::accumulate(maps.begin(), maps.end(), 0.0) / n;
    s.mean_fp = fp / n;
    if (maps.size() >= 2) {
      double ss = 0.0;
      for (double m : maps) ss += (m - s.mean_map) * (m - s.mean_map);
      const double sd = std::sqrt(ss / (n - 1));
      const boost::math::students_t dist(n - 1);
      s.ci95 = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
    }
    report.summary.push_back(s);
  }
  std::map<std::uint64_t, std::pair<int, int>> fp_by_seed;  // gaussian, deterministic
  std::map<std::uint64_t, int> seen;
  for (const NoiseRow& r : report.rows) {
    auto& p = fp_by_seed[r.seed];
    (r.mode == HeadMode::kGaussian ? p.first : p.second) = r.fp;
    ++seen[r.seed];
  }
  for (const auto& [seed, p] : fp_by_seed) {
    if (seen[seed] == 2 && p.first < p.second) ++report.seeds_with_fewer_gaussian_fp;
  }
  return report;
}

void write_noise_rows(std::ostream& out, const NoiseReport& report) {
  out << "mode,seed,map,fp,tp\n";
  for (const NoiseRow& r : report.rows) {
    out << to_string(r.mode) << ',' << r.seed << ',' << format_double(r.map) << ',' << r.fp << ','
        << r.tp << '\n';
  }
}

void write_noise_summary(std::ostream& out, const NoiseReport& report) {
  out << "mode,mean_map,ci95,mean_fp\n";
  for (const ModeSummary& s : report.summary) {
    out << to_string(s.mode) << ',' << format_double(s.mean_map) << ',' << format_double(s.ci95)
        << ',' << format_double(s.mean_fp) << '\n';
  }
}

}  // namespace gausshead
