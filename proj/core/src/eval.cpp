#include "gausshead/eval.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <tuple>

#include "gausshead/error.hpp"

namespace gausshead {

double EvalConfig::iou_threshold(int class_id) const {
  const auto it = class_iou.find(class_id);
  return it == class_iou.end() ? default_iou : it->second;
}

void EvalConfig::validate() const {
  auto check = [](double v, const std::string& name) {
    if (!(v > 0 && v <= 1)) throw ValidationError(name + ": must be in (0, 1]");
  };
  check(default_iou, "eval.iou_threshold");
  for (const auto& [c, v] : class_iou) check(v, "eval.class_iou[" + std::to_string(c) + "]");
  if (!(score_threshold >= 0 && score_threshold <= 1)) {
    throw ValidationError("eval.score_threshold: must be in [0, 1]");
  }
}

MatchReport& MatchReport::operator+=(const MatchReport& o) {
  fp += o.fp;
  tp += o.tp;
  gt += o.gt;
  for (const auto& [c, v] : o.per_class) {
    auto& mine = per_class[c];
    mine.fp += v.fp;
    mine.tp += v.tp;
    mine.gt += v.gt;
  }
  return *this;
}

namespace {

bool match_order(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.box.cx, a.box.cy, a.box.w, a.box.h, a.class_id) <
         std::tie(b.box.cx, b.box.cy, b.box.w, b.box.h, b.class_id);
}

// One greedy step: best unmatched same-class GT for `d`.
DetectionMatch match_one(const Detection& d, std::span<const GroundTruth> gts,
                         std::vector<char>& used, const EvalConfig& cfg) {
  DetectionMatch m;
  double best = -1.0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g] || gts[g].class_id != d.class_id) continue;
    const double v = iou(d.box, gts[g].box);
    if (v > best) {
      best = v;
      m.gt_index = static_cast<int>(g);
      m.iou = v;
    }
  }
  if (m.gt_index >= 0 && m.iou >= cfg.iou_threshold(d.class_id)) {
    m.tp = true;
    used[static_cast<std::size_t>(m.gt_index)] = 1;
  }
  return m;
}

}  // namespace

std::vector<DetectionMatch> match_detections(std::span<const Detection> dets,
                                             std::span<const GroundTruth> gts,
                                             const EvalConfig& cfg) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return match_order(dets[a], dets[b]); });
  std::vector<char> used(gts.size(), 0);
  std::vector<DetectionMatch> out(dets.size());
  for (std::size_t idx : order) out[idx] = match_one(dets[idx], gts, used, cfg);
  return out;
}

MatchReport match_image(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                        const EvalConfig& cfg) {
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (d.score >= cfg.score_threshold) kept.push_back(d);
  }
  const auto matches = match_detections(kept, gts, cfg);
  MatchReport r;
  for (const GroundTruth& g : gts) {
    ++r.gt;
    ++r.per_class[g.class_id].gt;
  }
  for (std::size_t n = 0; n < kept.size(); ++n) {
    auto& pc = r.per_class[kept[n].class_id];
    if (matches[n].tp) {
      ++r.tp;
      ++pc.tp;
    } else {
      ++r.fp;
      ++pc.fp;
    }
  }
  return r;
}

namespace {

double interpolated_ap(const std::vector<PrPoint>& curve, bool eleven_point) {
  if (curve.empty()) return 0.0;
  // Precision envelope: max precision at any recall >= r.
  std::vector<double> envelope(curve.size());
  double run = 0.0;
  for (std::size_t n = curve.size(); n-- > 0;) {
    run = std::max(run, curve[n].precision);
    envelope[n] = run;
  }
  if (eleven_point) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double r = t / 10.0;
      double p = 0.0;
      for (std::size_t n = 0; n < curve.size(); ++n) {
        if (curve[n].recall >= r - 1e-12) {
          p = envelope[n];
          break;
        }
      }
      sum += p;
    }
    return sum / 11.0;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t n = 0; n < curve.size(); ++n) {
    if (curve[n].recall > prev_recall) {
      ap += (curve[n].recall - prev_recall) * envelope[n];
      prev_recall = curve[n].recall;
    }
  }
  return ap;
}

}  // namespace

ApResult average_precision(const DetectionSet& dets, const AnnotationSet& gts, int class_id,
                           const EvalConfig& cfg) {
  ApResult out;
  for (const auto& [image, list] : gts) {
    for (const GroundTruth& g : list) out.gt += g.class_id == class_id ? 1 : 0;
  }

  struct Ref {
    const std::string* image;
    const Detection* det;
  };
  std::vector<Ref> refs;
  for (const auto& [image, list] : dets) {
    for (const Detection& d : list) {
      if (d.class_id == class_id) refs.push_back({&image, &d});
    }
  }
  std::stable_sort(refs.begin(), refs.end(), [](const Ref& a, const Ref& b) {
    if (a.det->score != b.det->score) return a.det->score > b.det->score;
    if (*a.image != *b.image) return *a.image < *b.image;
    return match_order(*a.det, *b.det);
  });

  std::map<std::string, std::vector<char>> used;
  static const std::vector<GroundTruth> kNone;
  int tp = 0;
  int fp = 0;
  for (const Ref& r : refs) {
    const auto git = gts.find(*r.image);
    const std::vector<GroundTruth>& image_gts = git == gts.end() ? kNone : git->second;
    auto& u = used[*r.image];
    if (u.size() != image_gts.size()) u.assign(image_gts.size(), 0);
    const DetectionMatch m = match_one(*r.det, image_gts, u, cfg);
    (m.tp ? tp : fp) += 1;
    const double precision = static_cast<double>(tp) / (tp + fp);
    const double recall = out.gt > 0 ? static_cast<double>(tp) / out.gt : 0.0;
    out.curve.push_back({r.det->score, precision, recall});
  }
  if (out.gt > 0) out.ap = interpolated_ap(out.curve, cfg.eleven_point);
  return out;
}

MapReport evaluate_map(const DetectionSet& dets, const AnnotationSet& gts, const EvalConfig& cfg,
                       int classes) {
  cfg.validate();
  std::set<int> class_ids;
  for (int c = 0; c < classes; ++c) class_ids.insert(c);
  for (const auto& [image, list] : gts) {
    for (const GroundTruth& g : list) class_ids.insert(g.class_id);
  }
  for (const auto& [image, list] : dets) {
    for (const Detection& d : list) class_ids.insert(d.class_id);
  }

  MapReport report;
  static const std::vector<Detection> kNoDets;
  static const std::vector<GroundTruth> kNoGts;
  std::set<std::string> images;
  for (const auto& [image, list] : gts) images.insert(image);
  for (const auto& [image, list] : dets) images.insert(image);
  for (const std::string& image : images) {
    const auto d = dets.find(image);
    const auto g = gts.find(image);
    report.counts += match_image(d == dets.end() ? kNoDets : d->second,
                                 g == gts.end() ? kNoGts : g->second, cfg);
  }

  double sum = 0.0;
  int defined = 0;
  for (int c : class_ids) {
    ApResult ap = average_precision(dets, gts, c, cfg);
    ClassReport cr;
    cr.class_id = c;
    cr.ap = ap.ap;
    cr.curve = std::move(ap.curve);
    if (const auto it = report.counts.per_class.find(c); it != report.counts.per_class.end()) {
      cr.counts = it->second;
    }
    if (cr.ap) {
      sum += *cr.ap;
      ++defined;
    } else {
      report.notices.push_back("class " + std::to_string(c) +
                               " has no ground truth; AP undefined and excluded from mAP");
    }
    report.per_class.push_back(std::move(cr));
  }
  report.map = defined > 0 ? sum / defined : 0.0;
  return report;
}

}  // namespace gausshead
