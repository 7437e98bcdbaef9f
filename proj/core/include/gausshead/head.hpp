#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gausshead/config.hpp"
#include "gausshead/geometry.hpp"

namespace gausshead {

/// Per-anchor field order of a raw prediction: interleaved mean/variance
/// logits for tx, ty, tw, th, then objectness, then one logit per class.
enum class Field : int {
  kMuX = 0,
  kSigX = 1,
  kMuY = 2,
  kSigY = 3,
  kMuW = 4,
  kSigW = 5,
  kMuH = 6,
  kSigH = 7,
  kObj = 8,
  kClass0 = 9,
};

inline constexpr int kBoxFields = 8;
inline constexpr int kFixedFields = 9;  // box fields + objectness

[[nodiscard]] constexpr int fields_per_anchor(int classes) noexcept {
  return kFixedFields + classes;
}
[[nodiscard]] constexpr int field_index(Field f) noexcept { return static_cast<int>(f); }

/// Log-size clamp applied before exp() in decode.
inline constexpr double kSizeLogitClamp = 20.0;
/// Variance-logit clamp applied before the sigmoid.
inline constexpr double kVarianceLogitClamp = 40.0;

/// Unactivated head output for a whole grid. Memory layout is row-major
/// (j, i, k, field), matching the feature-map file format.
class RawGrid {
 public:
  RawGrid() = default;
  explicit RawGrid(const GridSpec& grid, double fill = 0.0);
  RawGrid(int cols, int rows, int anchors, int classes, double fill = 0.0);

  [[nodiscard]] int cols() const noexcept { return cols_; }
  [[nodiscard]] int rows() const noexcept { return rows_; }
  [[nodiscard]] int anchors() const noexcept { return anchors_; }
  [[nodiscard]] int classes() const noexcept { return classes_; }
  [[nodiscard]] int fields() const noexcept { return fields_per_anchor(classes_); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

  [[nodiscard]] std::size_t offset(int i, int j, int k) const noexcept {
    return ((static_cast<std::size_t>(j) * cols_ + i) * anchors_ + k) * fields();
  }

  [[nodiscard]] std::span<double> slot(int i, int j, int k) noexcept {
    return {data_.data() + offset(i, j, k), static_cast<std::size_t>(fields())};
  }
  [[nodiscard]] std::span<const double> slot(int i, int j, int k) const noexcept {
    return {data_.data() + offset(i, j, k), static_cast<std::size_t>(fields())};
  }

  [[nodiscard]] double& at(int i, int j, int k, int field) noexcept {
    return data_[offset(i, j, k) + static_cast<std::size_t>(field)];
  }
  [[nodiscard]] double at(int i, int j, int k, int field) const noexcept {
    return data_[offset(i, j, k) + static_cast<std::size_t>(field)];
  }
  [[nodiscard]] double& at(int i, int j, int k, Field f) noexcept {
    return at(i, j, k, field_index(f));
  }
  [[nodiscard]] double at(int i, int j, int k, Field f) const noexcept {
    return at(i, j, k, field_index(f));
  }

  [[nodiscard]] std::span<double> values() noexcept { return data_; }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

  void fill(double v);

  /// Throws DimensionError if W, H, K or C differ from `grid`.
  void check_matches(const GridSpec& grid) const;

 private:
  int cols_ = 0;
  int rows_ = 0;
  int anchors_ = 0;
  int classes_ = 0;
  std::vector<double> data_;
};

/// Logistic function; no overflow for any finite input.
[[nodiscard]] double sigmoid(double x) noexcept;

/// Variance from its logit: sigmoid of the clamped logit, kept strictly
/// inside (0, 1).
[[nodiscard]] double variance_from_logit(double logit) noexcept;
/// d variance / d logit, zero where the clamp is active.
[[nodiscard]] double variance_from_logit_derivative(double logit) noexcept;

/// Activated Gaussian parameters in transformed (grid / log) space.
struct GaussianParams {
  double mu_x = 0.0;  ///< in (0, 1)
  double mu_y = 0.0;
  double mu_w = 0.0;  ///< unbounded
  double mu_h = 0.0;
  double var_x = 0.0;  ///< variances, in (0, 1)
  double var_y = 0.0;
  double var_w = 0.0;
  double var_h = 0.0;
};

/// Sigmoid on the center means and all variances; identity on the size means.
/// `raw` holds at least the 8 box fields in Field order.
[[nodiscard]] GaussianParams preprocess(std::span<const double> raw) noexcept;

struct GaussianBox {
  GaussianParams params;
  Box box;
  double uncertainty = 0.0;  ///< mean of the four variances
  bool saturated = false;    ///< a size mean hit the +-20 clamp
};

/// Image-space box for slot (i, j, k):
///   cx = (i + mu_x) / W, w = anchor_w * exp(mu_w) / IW, and likewise.
[[nodiscard]] GaussianBox decode_cell(const GaussianParams& p, int i, int j, int k,
                                      const GridSpec& grid, std::span<const Anchor> anchors);

/// Output channels per grid cell: K*(8+1+C) with Gaussian box fields,
/// K*(4+1+C) without.
[[nodiscard]] std::int64_t head_param_count(const GridSpec& grid, bool gaussian) noexcept;

/// Extra multiply-accumulates of a 1x1 Gaussian head over a deterministic
/// one, for a feature map of the given depth at the grid resolution.
[[nodiscard]] std::int64_t head_added_macs(const GridSpec& grid, std::int64_t feature_depth) noexcept;

}  // namespace gausshead
