#include "gausshead/head.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gausshead/error.hpp"

namespace gausshead {

RawGrid::RawGrid(const GridSpec& grid, double fill)
    : RawGrid(grid.cols, grid.rows, grid.anchors, grid.classes, fill) {}

RawGrid::RawGrid(int cols, int rows, int anchors, int classes, double fill)
    : cols_(cols), rows_(rows), anchors_(anchors), classes_(classes) {
  if (cols < 1 || rows < 1 || anchors < 1 || classes < 0) {
    throw DimensionError("RawGrid: invalid shape " + std::to_string(cols) + "x" +
                         std::to_string(rows) + "x" + std::to_string(anchors) + " C=" +
                         std::to_string(classes));
  }
  data_.assign(static_cast<std::size_t>(cols) * rows * anchors * fields_per_anchor(classes),
               fill);
}

void RawGrid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void RawGrid::check_matches(const GridSpec& grid) const {
  if (cols_ != grid.cols || rows_ != grid.rows || anchors_ != grid.anchors ||
      classes_ != grid.classes) {
    throw DimensionError("raw grid is " + std::to_string(cols_) + "x" + std::to_string(rows_) +
                         " K=" + std::to_string(anchors_) + " C=" + std::to_string(classes_) +
                         " but the config expects " + std::to_string(grid.cols) + "x" +
                         std::to_string(grid.rows) + " K=" + std::to_string(grid.anchors) +
                         " C=" + std::to_string(grid.classes));
  }
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {
constexpr double kBelowOne = 1.0 - 0x1.0p-53;
}

double variance_from_logit(double logit) noexcept {
  const double v = sigmoid(std::clamp(logit, -kVarianceLogitClamp, kVarianceLogitClamp));
  return std::min(v, kBelowOne);
}

double variance_from_logit_derivative(double logit) noexcept {
  if (logit < -kVarianceLogitClamp || logit > kVarianceLogitClamp) return 0.0;
  const double s = sigmoid(logit);
  return s * (1.0 - s);
}

GaussianParams preprocess(std::span<const double> raw) noexcept {
  GaussianParams p;
  p.mu_x = sigmoid(raw[field_index(Field::kMuX)]);
  p.mu_y = sigmoid(raw[field_index(Field::kMuY)]);
  p.mu_w = raw[field_index(Field::kMuW)];
  p.mu_h = raw[field_index(Field::kMuH)];
  p.var_x = variance_from_logit(raw[field_index(Field::kSigX)]);
  p.var_y = variance_from_logit(raw[field_index(Field::kSigY)]);
  p.var_w = variance_from_logit(raw[field_index(Field::kSigW)]);
  p.var_h = variance_from_logit(raw[field_index(Field::kSigH)]);
  return p;
}

GaussianBox decode_cell(const GaussianParams& p, int i, int j, int k, const GridSpec& grid,
                        std::span<const Anchor> anchors) {
  if (i < 0 || i >= grid.cols || j < 0 || j >= grid.rows || k < 0 || k >= grid.anchors ||
      static_cast<std::size_t>(k) >= anchors.size()) {
    throw DimensionError("decode_cell: slot (" + std::to_string(i) + "," + std::to_string(j) +
                         "," + std::to_string(k) + ") outside the grid");
  }
  GaussianBox out;
  out.params = p;
  const double lw = std::clamp(p.mu_w, -kSizeLogitClamp, kSizeLogitClamp);
  const double lh = std::clamp(p.mu_h, -kSizeLogitClamp, kSizeLogitClamp);
  out.saturated = lw != p.mu_w || lh != p.mu_h;
  const Anchor& a = anchors[static_cast<std::size_t>(k)];
  out.box.cx = (i + p.mu_x) / grid.cols;
  out.box.cy = (j + p.mu_y) / grid.rows;
  out.box.w = a.w * std::exp(lw) / grid.image_width;
  out.box.h = a.h * std::exp(lh) / grid.image_height;
  out.uncertainty = (p.var_x + p.var_y + p.var_w + p.var_h) / 4.0;
  return out;
}

std::int64_t head_param_count(const GridSpec& grid, bool gaussian) noexcept {
  const std::int64_t box = gaussian ? kBoxFields : kBoxFields / 2;
  return static_cast<std::int64_t>(grid.anchors) * (box + 1 + grid.classes);
}

std::int64_t head_added_macs(const GridSpec& grid, std::int64_t feature_depth) noexcept {
  const std::int64_t extra = head_param_count(grid, true) - head_param_count(grid, false);
  return feature_depth * grid.cols * grid.rows * extra;
}

}  // namespace gausshead
