#include "gausshead/encoding.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include "gausshead/error.hpp"

namespace gausshead {

void validate_ground_truth(const GroundTruth& gt, int classes) {
  const Box& b = gt.box;
  if (!(b.w > 0 && b.w <= 1)) throw ValidationError("ground truth: w must be in (0, 1]");
  if (!(b.h > 0 && b.h <= 1)) throw ValidationError("ground truth: h must be in (0, 1]");
  if (!(b.cx >= 0 && b.cx <= 1)) throw ValidationError("ground truth: cx must be in [0, 1]");
  if (!(b.cy >= 0 && b.cy <= 1)) throw ValidationError("ground truth: cy must be in [0, 1]");
  if (gt.class_id < 0 || (classes > 0 && gt.class_id >= classes)) {
    throw ValidationError("ground truth: class_id " + std::to_string(gt.class_id) +
                          " out of range");
  }
}

namespace {

// floor(v * n) clamped to the last cell, with the fractional offset.
std::pair<int, double> cell_offset(double v, int n) {
  const double scaled = v * n;
  auto idx = static_cast<int>(std::floor(scaled));
  double offset = scaled - idx;
  if (idx >= n) {
    idx = n - 1;
    offset = std::nextafter(1.0, 0.0);
  } else if (idx < 0) {
    idx = 0;
    offset = 0.0;
  }
  return {idx, offset};
}

}  // namespace

CenterTarget encode_center(const Box& gt, const GridSpec& grid) {
  const auto [i, tx] = cell_offset(gt.cx, grid.cols);
  const auto [j, ty] = cell_offset(gt.cy, grid.rows);
  return {i, j, tx, ty};
}

SizeTarget encode_size(const Box& gt, const GridSpec& grid, const Anchor& anchor) {
  if (!(gt.w > 0) || !(gt.h > 0)) {
    throw ValidationError("encode_size: box width and height must be > 0");
  }
  return {std::log(gt.w * grid.image_width / anchor.w),
          std::log(gt.h * grid.image_height / anchor.h)};
}

int assign_anchor(const Box& gt, std::span<const Anchor> anchors, const GridSpec& grid) {
  const double w = gt.w * grid.image_width;
  const double h = gt.h * grid.image_height;
  int best = 0;
  double best_iou = -1.0;
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const double v = shape_iou(w, h, anchors[k].w, anchors[k].h);
    if (v > best_iou) {
      best_iou = v;
      best = static_cast<int>(k);
    }
  }
  return best;
}

double scale_weight(const Box& gt) noexcept { return 2.0 - gt.w * gt.h; }

double loss_weight(double omega, int delta) noexcept { return omega * delta / 2.0; }

EncodeResult encode_targets(std::span<const GroundTruth> gts, const GridSpec& grid,
                            std::span<const Anchor> anchors) {
  if (anchors.empty()) throw ValidationError("encode_targets: anchors must not be empty");
  EncodeResult out;
  std::map<std::tuple<int, int, int>, std::size_t> claimed;
  for (std::size_t n = 0; n < gts.size(); ++n) {
    const GroundTruth& gt = gts[n];
    validate_ground_truth(gt);
    const CenterTarget c = encode_center(gt.box, grid);
    const int k = assign_anchor(gt.box, anchors, grid);
    const SizeTarget s = encode_size(gt.box, grid, anchors[static_cast<std::size_t>(k)]);
    const EncodedTarget t{c.i, c.j, k, c.tx, c.ty, s.tw, s.th,
                          loss_weight(scale_weight(gt.box), 1), gt.class_id, 1};
    const auto key = std::make_tuple(c.i, c.j, k);
    if (auto it = claimed.find(key); it != claimed.end()) {
      out.targets[it->second] = t;
      out.warnings.push_back("slot (" + std::to_string(c.i) + "," + std::to_string(c.j) + "," +
                             std::to_string(k) + ") claimed again by ground truth " +
                             std::to_string(n) + "; earlier target replaced");
    } else {
      claimed.emplace(key, out.targets.size());
      out.targets.push_back(t);
    }
  }
  return out;
}

}  // namespace gausshead
