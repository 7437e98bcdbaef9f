#pragma once

#include <span>

#include "gausshead/config.hpp"
#include "gausshead/encoding.hpp"
#include "gausshead/head.hpp"

namespace gausshead {

/// Box regression loss family.
enum class BoxLoss {
  kGaussianNll,   ///< -gamma * log(N(target | mu, var) + eps) per coordinate
  kSquaredError,  ///< gamma * (target - mu)^2, the deterministic baseline
};

struct LossConfig {
  double epsilon = 1e-9;     ///< added to the density inside the log
  double ignore_iou = 0.5;   ///< objectness masking threshold
  bool ignore_enabled = true;
  BoxLoss box_loss = BoxLoss::kGaussianNll;

  void validate() const;
};

struct LossBreakdown {
  double lx = 0.0;
  double ly = 0.0;
  double lw = 0.0;
  double lh = 0.0;
  double l_obj = 0.0;
  double l_class = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o) noexcept;
  [[nodiscard]] LossBreakdown scaled(double s) const noexcept;
};

/// Normal density. Throws ValidationError for var <= 0.
[[nodiscard]] double gaussian_pdf(double x, double mu, double var);

/// Loss of one coordinate with derivatives w.r.t. the activated mean and
/// variance.
struct CoordinateLoss {
  double loss = 0.0;
  double d_mu = 0.0;
  double d_var = 0.0;
};

/// -gamma * log(pdf(target; mu, var) + eps), with exact derivatives
/// (the eps term included).
[[nodiscard]] CoordinateLoss nll_coordinate(double target, double mu, double var, double gamma,
                                            double eps);

/// gamma * (target - mu)^2; d_var is always 0.
[[nodiscard]] CoordinateLoss squared_error_coordinate(double target, double mu,
                                                      double gamma) noexcept;

struct BceResult {
  double loss = 0.0;
  double d_logit = 0.0;
};

/// Binary cross-entropy on a logit in the overflow-free form
/// max(z,0) - z*y + log1p(exp(-|z|)). d_logit = sigmoid(z) - y.
[[nodiscard]] BceResult bce_loss(double logit, double label) noexcept;

/// Loss value with the gradient grid w.r.t. every raw field.
struct LossResult {
  LossBreakdown breakdown;
  RawGrid grad;
};

/// Box part only. Slots without a target contribute exactly zero loss and
/// zero gradient. Throws DimensionError if a target lies outside `raw`.
[[nodiscard]] LossResult box_loss(const RawGrid& raw, std::span<const EncodedTarget> targets,
                                  const LossConfig& cfg);

/// Box loss plus objectness and class BCE.
///  - objectness label 1 at assigned slots, 0 elsewhere, except unassigned
///    slots whose decoded box has IOU > ignore_iou with a ground truth, which
///    are masked out;
///  - independent per-class BCE with one-hot labels at assigned slots only.
/// Terms are summed in a fixed (j, i, k, field) order with compensated
/// summation, so the result does not depend on threading.
[[nodiscard]] LossResult total_loss(const RawGrid& raw, std::span<const EncodedTarget> targets,
                                    std::span<const GroundTruth> gts, const GridSpec& grid,
                                    std::span<const Anchor> anchors, const LossConfig& cfg);

}  // namespace gausshead
