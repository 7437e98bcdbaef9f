#include <gtest/gtest.h>

#include <random>

#include "gausshead/error.hpp"
#include "gausshead/eval.hpp"
#include "oracles.hpp"

using namespace gausshead;

namespace {

Detection det(int cls, double score, Box b) {
  Detection d;
  d.class_id = cls;
  d.score = score;
  d.box = b;
  return d;
}

// Box with a prescribed IOU against `gt` by shrinking its width.
Box with_iou(const Box& gt, double v) { return {gt.cx - gt.w * (1 - v) / 2, gt.cy, gt.w * v, gt.h}; }

}  // namespace

TEST(Eval, SingleMatchAboveThreshold) {
  const Box gt{0.5, 0.5, 0.4, 0.4};
  EvalConfig cfg;
  cfg.default_iou = 0.75;
  const std::vector<Detection> d{det(0, 0.9, with_iou(gt, 0.8))};
  const std::vector<GroundTruth> g{{0, gt}};
  const auto r = match_image(d, g, cfg);
  EXPECT_EQ(r.tp, 1);
  EXPECT_EQ(r.fp, 0);
  EXPECT_EQ(r.gt, 1);
}

TEST(Eval, DoubleDetectionIsPenalized) {
  const Box gt{0.5, 0.5, 0.4, 0.4};
  const std::vector<Detection> d{det(0, 0.9, gt), det(0, 0.8, with_iou(gt, 0.9))};
  const std::vector<GroundTruth> g{{0, gt}};
  const auto r = match_image(d, g, EvalConfig{});
  EXPECT_EQ(r.tp, 1);
  EXPECT_EQ(r.fp, 1);
}

TEST(Eval, ScoreThresholdFiltersCounting) {
  const Box gt{0.5, 0.5, 0.4, 0.4};
  const std::vector<Detection> d{det(0, 0.4, gt)};
  const std::vector<GroundTruth> g{{0, gt}};
  const auto r = match_image(d, g, EvalConfig{});
  EXPECT_EQ(r.tp + r.fp, 0);
  EXPECT_EQ(r.gt, 1);
}

TEST(Eval, MatchImageAgreesWithBruteForce) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<GroundTruth> g;
    std::vector<Detection> d;
    const int ng = static_cast<int>(rng() % 5), nd = static_cast<int>(rng() % 7);
    for (int n = 0; n < ng; ++n) g.push_back({static_cast<int>(rng() % 2), {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng)}});
    for (int n = 0; n < nd; ++n) {
      Box b{0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng)};
      if (ng > 0 && n % 2 == 0) {
        const Box& t = g[rng() % ng].box;
        b = {t.cx + 0.05 * (u(rng) - 0.5), t.cy + 0.05 * (u(rng) - 0.5), t.w * (0.8 + 0.4 * u(rng)), t.h};
      }
      d.push_back(det(static_cast<int>(rng() % 2), u(rng), b));
    }
    EvalConfig cfg;
    cfg.default_iou = 0.5;
    cfg.score_threshold = 0.3;
    const auto r = match_image(d, g, cfg);
    const auto o = oracle::match(d, g, 0.5, 0.3);
    EXPECT_EQ(r.tp, o.tp);
    EXPECT_EQ(r.fp, o.fp);
    EXPECT_EQ(r.gt, o.gt);
    EXPECT_LE(r.tp, r.gt);
  }
}

TEST(Eval, ApFixture) {
  const Box g1{0.25, 0.25, 0.2, 0.2}, g2{0.75, 0.75, 0.2, 0.2};
  DetectionSet dets{{"a", {det(0, 0.9, g1), det(0, 0.8, {0.5, 0.1, 0.1, 0.1}), det(0, 0.7, g2)}}};
  AnnotationSet gts{{"a", {{0, g1}, {0, g2}}}};
  const auto ap = average_precision(dets, gts, 0, EvalConfig{});
  ASSERT_TRUE(ap.ap.has_value());
  EXPECT_NEAR(*ap.ap, 0.5 + (2.0 / 3.0) * 0.5, 1e-12);
  EXPECT_NEAR(*ap.ap, 0.8333, 1e-4);
}

TEST(Eval, ApTrivialCases) {
  const Box g{0.5, 0.5, 0.2, 0.2};
  AnnotationSet gts{{"a", {{0, g}}}};
  EXPECT_EQ(*average_precision({{"a", {det(0, 0.9, g)}}}, gts, 0, EvalConfig{}).ap, 1.0);
  EXPECT_EQ(*average_precision({{"a", {det(0, 0.9, with_iou(g, 0.3))}}}, gts, 0, EvalConfig{}).ap, 0.0);
  EXPECT_FALSE(average_precision({{"a", {det(1, 0.9, g)}}}, gts, 1, EvalConfig{}).ap.has_value());
}

TEST(Eval, ApAgreesWithBruteForceAndProperties) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    DetectionSet dets;
    AnnotationSet gts;
    for (const char* id : {"x", "y"}) {
      const int ng = 1 + static_cast<int>(rng() % 3);
      for (int n = 0; n < ng; ++n) gts[id].push_back({0, {0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng)}});
      const int nd = static_cast<int>(rng() % 5);
      for (int n = 0; n < nd; ++n) {
        Box b{0.2 + 0.6 * u(rng), 0.2 + 0.6 * u(rng), 0.1 + 0.3 * u(rng), 0.1 + 0.3 * u(rng)};
        if (n % 2 == 0) {
          const Box& t = gts[id][rng() % gts[id].size()].box;
          b = {t.cx + 0.04 * (u(rng) - 0.5), t.cy, t.w * (0.85 + 0.3 * u(rng)), t.h};
        }
        dets[id].push_back(det(0, u(rng), b));
      }
    }
    const double ap = average_precision(dets, gts, 0, EvalConfig{}).ap.value();
    EXPECT_NEAR(ap, oracle::average_precision(dets, gts, 0, 0.5), 1e-12);

    DetectionSet squashed = dets;
    for (auto& [id, ds] : squashed)
      for (auto& d : ds) d.score = d.score * d.score * 0.5;
    EXPECT_NEAR(average_precision(squashed, gts, 0, EvalConfig{}).ap.value(), ap, 1e-12);
  }
}

TEST(Eval, MapAveragesDefinedClasses) {
  const Box g{0.5, 0.5, 0.2, 0.2};
  DetectionSet dets{{"a", {det(0, 0.9, g), det(1, 0.9, {0.1, 0.1, 0.05, 0.05})}}};
  AnnotationSet gts{{"a", {{0, g}, {1, g}}}};
  const auto rep = evaluate_map(dets, gts, EvalConfig{}, 3);
  EXPECT_DOUBLE_EQ(rep.map, 0.5);
  EXPECT_FALSE(rep.notices.empty());  // class 2 has no ground truth
  EXPECT_EQ(rep.per_class.size(), 3u);
  EXPECT_EQ(rep.counts.tp, 1);
  EXPECT_EQ(rep.counts.fp, 1);
}

TEST(Eval, ClassThresholdsAndValidation) {
  EvalConfig cfg;
  cfg.class_iou = {{0, 0.7}};
  EXPECT_EQ(cfg.iou_threshold(0), 0.7);
  EXPECT_EQ(cfg.iou_threshold(1), 0.5);
  cfg.class_iou[1] = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Eval, ElevenPointOption) {
  const Box g1{0.25, 0.25, 0.2, 0.2}, g2{0.75, 0.75, 0.2, 0.2};
  DetectionSet dets{{"a", {det(0, 0.9, g1), det(0, 0.8, {0.5, 0.1, 0.1, 0.1}), det(0, 0.7, g2)}}};
  AnnotationSet gts{{"a", {{0, g1}, {0, g2}}}};
  EvalConfig cfg;
  cfg.eleven_point = true;
  // Recall points 0..0.5 take precision 1, 0.6..1.0 take 2/3.
  EXPECT_NEAR(*average_precision(dets, gts, 0, cfg).ap, (6 * 1.0 + 5 * (2.0 / 3.0)) / 11, 1e-12);
}
