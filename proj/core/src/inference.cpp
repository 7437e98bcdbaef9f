#include "gausshead/inference.hpp"

#include <algorithm>
#include <tuple>

namespace gausshead {

std::vector<Detection> extract_detections(const RawGrid& raw, const GridSpec& grid,
                                          std::span<const Anchor> anchors,
                                          const DetectOptions& opts) {
  raw.check_matches(grid);
  struct Candidate {
    Detection det;
    int j, i, k;
  };
  std::vector<Candidate> cands;
  const int obj_field = field_index(Field::kObj);
  const int class0 = field_index(Field::kClass0);

  for (int j = 0; j < grid.rows; ++j) {
    for (int i = 0; i < grid.cols; ++i) {
      for (int k = 0; k < grid.anchors; ++k) {
        const auto slot = raw.slot(i, j, k);
        const double obj = sigmoid(slot[obj_field]);
        const GaussianBox gb = decode_cell(preprocess(slot), i, j, k, grid, anchors);
        const double unc = opts.use_uncertainty ? gb.uncertainty : 0.0;

        auto emit = [&](int c) {
          const double cls = sigmoid(slot[class0 + c]);
          const double score = criterion(obj, cls, unc);
          if (score > opts.threshold) {
            cands.push_back({{c, score, gb.box, gb.uncertainty, obj, cls}, j, i, k});
          }
        };
        if (opts.all_classes) {
          for (int c = 0; c < grid.classes; ++c) emit(c);
        } else if (grid.classes > 0) {
          int best = 0;
          for (int c = 1; c < grid.classes; ++c) {
            if (slot[class0 + c] > slot[class0 + best]) best = c;
          }
          emit(best);
        }
      }
    }
  }

  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.det.score != b.det.score) return a.det.score > b.det.score;
    return std::tie(a.j, a.i, a.k, a.det.class_id) < std::tie(b.j, b.i, b.k, b.det.class_id);
  });
  std::vector<Detection> out;
  out.reserve(cands.size());
  for (auto& c : cands) out.push_back(c.det);
  return out;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& s) {
      return s.class_id == d.class_id && iou(s.box, d.box) > iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace gausshead
