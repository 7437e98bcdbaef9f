#include "gausshead/loss.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gausshead/error.hpp"

namespace gausshead {

void LossConfig::validate() const {
  if (!(epsilon > 0)) throw ValidationError("loss.epsilon: must be > 0");
  if (!(ignore_iou >= 0 && ignore_iou <= 1)) {
    throw ValidationError("loss.ignore_iou: must be in [0, 1]");
  }
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) noexcept {
  lx += o.lx;
  ly += o.ly;
  lw += o.lw;
  lh += o.lh;
  l_obj += o.l_obj;
  l_class += o.l_class;
  total += o.total;
  return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const noexcept {
  return {lx * s, ly * s, lw * s, lh * s, l_obj * s, l_class * s, total * s};
}

double gaussian_pdf(double x, double mu, double var) {
  if (!(var > 0)) throw ValidationError("gaussian_pdf: variance must be > 0");
  const double d = x - mu;
  return std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

CoordinateLoss nll_coordinate(double target, double mu, double var, double gamma, double eps) {
  if (gamma == 0.0) return {};
  const double p = gaussian_pdf(target, mu, var);
  const double d = target - mu;
  const double q = p + eps;
  // dp/dmu = p * d / var;  dp/dvar = p * (d^2 / (2 var^2) - 1 / (2 var))
  const double dp_dmu = p * d / var;
  const double dp_dvar = p * (d * d / (2.0 * var * var) - 1.0 / (2.0 * var));
  return {-gamma * std::log(q), -gamma * dp_dmu / q, -gamma * dp_dvar / q};
}

CoordinateLoss squared_error_coordinate(double target, double mu, double gamma) noexcept {
  const double d = mu - target;
  return {gamma * d * d, 2.0 * gamma * d, 0.0};
}

BceResult bce_loss(double logit, double label) noexcept {
  const double loss =
      std::max(logit, 0.0) - logit * label + std::log1p(std::exp(-std::abs(logit)));
  return {loss, sigmoid(logit) - label};
}

namespace {

// Neumaier compensated sum.
class Accumulator {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  [[nodiscard]] double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct BoxAccumulators {
  Accumulator x, y, w, h;
};

void check_target(const RawGrid& raw, const EncodedTarget& t) {
  if (t.i < 0 || t.i >= raw.cols() || t.j < 0 || t.j >= raw.rows() || t.k < 0 ||
      t.k >= raw.anchors()) {
    throw DimensionError("target slot (" + std::to_string(t.i) + "," + std::to_string(t.j) +
                         "," + std::to_string(t.k) + ") outside the raw grid");
  }
  if (t.class_id < 0 || t.class_id >= raw.classes()) {
    throw DimensionError("target class " + std::to_string(t.class_id) + " outside the raw grid");
  }
}

// Adds the box loss for one target and writes raw-field gradients.
void accumulate_box(const RawGrid& raw, const EncodedTarget& t, const LossConfig& cfg,
                    BoxAccumulators& acc, RawGrid& grad) {
  if (t.delta == 0 || t.gamma == 0.0) return;
  const auto slot = raw.slot(t.i, t.j, t.k);
  const GaussianParams p = preprocess(slot);
  auto g = grad.slot(t.i, t.j, t.k);

  struct Coord {
    double target;
    double mu;
    double var;
    Field mu_field;
    Field var_field;
    bool squashed;  // mean goes through a sigmoid
    Accumulator* acc;
  };
  const Coord coords[] = {
      {t.tx, p.mu_x, p.var_x, Field::kMuX, Field::kSigX, true, &acc.x},
      {t.ty, p.mu_y, p.var_y, Field::kMuY, Field::kSigY, true, &acc.y},
      {t.tw, p.mu_w, p.var_w, Field::kMuW, Field::kSigW, false, &acc.w},
      {t.th, p.mu_h, p.var_h, Field::kMuH, Field::kSigH, false, &acc.h},
  };
  for (const Coord& c : coords) {
    const CoordinateLoss l =
        cfg.box_loss == BoxLoss::kGaussianNll
            ? nll_coordinate(c.target, c.mu, c.var, t.gamma, cfg.epsilon)
            : squared_error_coordinate(c.target, c.mu, t.gamma);
    c.acc->add(l.loss);
    const double dmu_draw = c.squashed ? c.mu * (1.0 - c.mu) : 1.0;
    g[field_index(c.mu_field)] += l.d_mu * dmu_draw;
    if (cfg.box_loss == BoxLoss::kGaussianNll) {
      g[field_index(c.var_field)] +=
          l.d_var * variance_from_logit_derivative(slot[field_index(c.var_field)]);
    }
  }
}

LossBreakdown finish(const BoxAccumulators& box, const Accumulator& obj, const Accumulator& cls) {
  LossBreakdown b;
  b.lx = box.x.value();
  b.ly = box.y.value();
  b.lw = box.w.value();
  b.lh = box.h.value();
  b.l_obj = obj.value();
  b.l_class = cls.value();
  b.total = b.lx + b.ly + b.lw + b.lh + b.l_obj + b.l_class;
  return b;
}

}  // namespace

LossResult box_loss(const RawGrid& raw, std::span<const EncodedTarget> targets,
                    const LossConfig& cfg) {
  LossResult out{{}, RawGrid(raw.cols(), raw.rows(), raw.anchors(), raw.classes())};
  BoxAccumulators acc;
  for (const EncodedTarget& t : targets) {
    check_target(raw, t);
    accumulate_box(raw, t, cfg, acc, out.grad);
  }
  out.breakdown = finish(acc, Accumulator{}, Accumulator{});
  return out;
}

LossResult total_loss(const RawGrid& raw, std::span<const EncodedTarget> targets,
                      std::span<const GroundTruth> gts, const GridSpec& grid,
                      std::span<const Anchor> anchors, const LossConfig& cfg) {
  raw.check_matches(grid);
  if (static_cast<int>(anchors.size()) != grid.anchors) {
    throw DimensionError("total_loss: " + std::to_string(anchors.size()) +
                         " anchors for K=" + std::to_string(grid.anchors));
  }
  LossResult out{{}, RawGrid(grid)};

  // Slot -> target index, -1 when unassigned.
  std::vector<int> assigned(static_cast<std::size_t>(grid.slots()), -1);
  auto slot_id = [&](int i, int j, int k) {
    return (static_cast<std::size_t>(j) * grid.cols + i) * grid.anchors + k;
  };
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const EncodedTarget& t = targets[n];
    check_target(raw, t);
    if (t.delta != 0) assigned[slot_id(t.i, t.j, t.k)] = static_cast<int>(n);
  }

  BoxAccumulators box;
  Accumulator obj;
  Accumulator cls;
  const int obj_field = field_index(Field::kObj);
  const int class0 = field_index(Field::kClass0);

  for (int j = 0; j < grid.rows; ++j) {
    for (int i = 0; i < grid.cols; ++i) {
      for (int k = 0; k < grid.anchors; ++k) {
        const auto slot = raw.slot(i, j, k);
        auto g = out.grad.slot(i, j, k);
        const int n = assigned[slot_id(i, j, k)];
        if (n >= 0) {
          const EncodedTarget& t = targets[static_cast<std::size_t>(n)];
          accumulate_box(raw, t, cfg, box, out.grad);
          const BceResult o = bce_loss(slot[obj_field], 1.0);
          obj.add(o.loss);
          g[obj_field] += o.d_logit;
          for (int c = 0; c < grid.classes; ++c) {
            const BceResult r = bce_loss(slot[class0 + c], c == t.class_id ? 1.0 : 0.0);
            cls.add(r.loss);
            g[class0 + c] += r.d_logit;
          }
          continue;
        }
        if (cfg.ignore_enabled && !gts.empty()) {
          const Box pred = decode_cell(preprocess(slot), i, j, k, grid, anchors).box;
          bool masked = false;
          for (const GroundTruth& gt : gts) {
            if (iou(pred, gt.box) > cfg.ignore_iou) {
              masked = true;
              break;
            }
          }
          if (masked) continue;
        }
        const BceResult o = bce_loss(slot[obj_field], 0.0);
        obj.add(o.loss);
        g[obj_field] += o.d_logit;
      }
    }
  }
  out.breakdown = finish(box, obj, cls);
  return out;
}

}  // namespace gausshead
