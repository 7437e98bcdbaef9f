#include <gtest/gtest.h>

#include <random>

#include "gausshead/error.hpp"
#include "gausshead/geometry.hpp"
#include "oracles.hpp"

using namespace gausshead;

namespace {

Box random_box(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {u(rng), u(rng), 0.01 + 0.5 * u(rng), 0.01 + 0.5 * u(rng)};
}

}  // namespace

TEST(Geometry, IouOfIdenticalBoxIsOne) {
  const Box b{0.3, 0.4, 0.2, 0.1};
  EXPECT_DOUBLE_EQ(iou(b, b), 1.0);
}

TEST(Geometry, DisjointBoxesHaveZeroIou) {
  EXPECT_EQ(iou({0.1, 0.1, 0.1, 0.1}, {0.8, 0.8, 0.1, 0.1}), 0.0);
}

TEST(Geometry, OverlappingCornersMatchRasterOracle) {
  const double expected = oracle::raster_iou(0, 0, 2, 2, 1, 1, 3, 3);
  const double got = iou(Box::from_corners({0, 0, 2, 2}), Box::from_corners({1, 1, 3, 3}));
  EXPECT_NEAR(got, expected, 1e-3);
  EXPECT_NEAR(got, 1.0 / 7.0, 1e-12);
}

TEST(Geometry, DegenerateBoxYieldsZero) {
  EXPECT_EQ(iou({0.5, 0.5, 0.0, 0.2}, {0.5, 0.5, 0.0, 0.2}), 0.0);
}

TEST(Geometry, CornerConversions) {
  EXPECT_EQ((Box{0.5, 0.5, 1, 1}.corners()), (Corners{0, 0, 1, 1}));
  EXPECT_EQ((Box{0.25, 0.25, 0.5, 0.5}.corners()), (Corners{0, 0, 0.5, 0.5}));
  EXPECT_THROW((void)Box::from_corners({0.5, 0, 0.4, 1}), ValidationError);
}

TEST(Geometry, CornerRoundTrip) {
  std::mt19937_64 rng(1);
  for (int n = 0; n < 1000; ++n) {
    const Box b = random_box(rng);
    const Box r = Box::from_corners(b.corners());
    EXPECT_NEAR(r.cx, b.cx, 1e-15);
    EXPECT_NEAR(r.cy, b.cy, 1e-15);
    EXPECT_NEAR(r.w, b.w, 1e-15);
    EXPECT_NEAR(r.h, b.h, 1e-15);
  }
}

TEST(Geometry, IouPropertiesOnRandomBoxes) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 2000; ++n) {
    const Box a = random_box(rng);
    const Box b = random_box(rng);
    const double v = iou(a, b);
    EXPECT_DOUBLE_EQ(v, iou(b, a));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
    EXPECT_NEAR(v, oracle::iou(a, b), 1e-12);
    if (v == 1.0) EXPECT_EQ(a.corners(), b.corners());
  }
}

TEST(Geometry, RasterOracleAgreesOnRandomBoxes) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 5; ++n) {
    const Box a = random_box(rng);
    const Box b{a.cx + 0.05, a.cy - 0.03, a.w * 0.8, a.h * 1.3};
    const Corners ca = a.corners(), cb = b.corners();
    EXPECT_NEAR(iou(a, b), oracle::raster_iou(ca.x1, ca.y1, ca.x2, ca.y2, cb.x1, cb.y1, cb.x2, cb.y2), 3e-3);
  }
}

TEST(Geometry, ShapeIou) {
  EXPECT_DOUBLE_EQ(shape_iou(10, 10, 10, 10), 1.0);
  EXPECT_DOUBLE_EQ(shape_iou(10, 10, 20, 20), 0.25);
  EXPECT_DOUBLE_EQ(shape_iou(10, 20, 20, 10), 100.0 / 300.0);
}
