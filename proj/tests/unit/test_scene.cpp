#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gausshead/error.hpp"
#include "gausshead/io.hpp"
#include "gausshead/scene.hpp"

using namespace gausshead;

namespace {

std::filesystem::path tmp_dir(const std::string& name) {
  auto p = std::filesystem::path(GAUSSHEAD_TEST_TMP) / "scene" / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(Scene, EmptyDataset) {
  EXPECT_TRUE(gen_dataset(SceneSpec{}, 0).samples.empty());
}

TEST(Scene, DeterministicAndPrefixStable) {
  SceneSpec s;
  s.seed = 11;
  const Dataset a = gen_dataset(s, 20);
  const Dataset b = gen_dataset(s, 20);
  const Dataset c = gen_dataset(s, 5);
  for (std::size_t n = 0; n < 20; ++n) {
    EXPECT_EQ(a.samples[n].image, b.samples[n].image);
    EXPECT_EQ(a.samples[n].labels, b.samples[n].labels);
  }
  for (std::size_t n = 0; n < 5; ++n) EXPECT_EQ(a.samples[n].image, c.samples[n].image);
}

TEST(Scene, BoxesInsideImageAndMatchPixelsWithoutNoise) {
  SceneSpec s;
  s.seed = 3;
  s.pixel_noise = 0.0;
  const Dataset d = gen_dataset(s, 50);
  for (const Sample& smp : d.samples) {
    ASSERT_GE(smp.labels.size(), 1u);
    ASSERT_LE(smp.labels.size(), 4u);
    EXPECT_EQ(smp.labels, smp.rendered);
    for (const GroundTruth& g : smp.labels) {
      const Corners c = g.box.corners();
      EXPECT_GE(c.x1, 0.0);
      EXPECT_GE(c.y1, 0.0);
      EXPECT_LE(c.x2, 1.0);
      EXPECT_LE(c.y2, 1.0);
      // Bounding box of the pixels carrying this class's intensity inside
      // a one-pixel margin around the annotation.
      const int level = class_intensity(g.class_id, s.classes);
      int x1 = s.image_size, y1 = s.image_size, x2 = -1, y2 = -1;
      const int mx1 = std::max(0, static_cast<int>(std::floor(c.x1 * s.image_size)) - 1);
      const int my1 = std::max(0, static_cast<int>(std::floor(c.y1 * s.image_size)) - 1);
      const int mx2 = std::min(s.image_size, static_cast<int>(std::ceil(c.x2 * s.image_size)) + 1);
      const int my2 = std::min(s.image_size, static_cast<int>(std::ceil(c.y2 * s.image_size)) + 1);
      for (int y = my1; y < my2; ++y)
        for (int x = mx1; x < mx2; ++x)
          if (smp.image.pixels[static_cast<std::size_t>(y) * s.image_size + x] == level) {
            x1 = std::min(x1, x);
            y1 = std::min(y1, y);
            x2 = std::max(x2, x + 1);
            y2 = std::max(y2, y + 1);
          }
      EXPECT_LE(std::abs(x1 - c.x1 * s.image_size), 1.0);
      EXPECT_LE(std::abs(y1 - c.y1 * s.image_size), 1.0);
      EXPECT_LE(std::abs(x2 - c.x2 * s.image_size), 1.0);
      EXPECT_LE(std::abs(y2 - c.y2 * s.image_size), 1.0);
    }
  }
}

TEST(Scene, LabelNoiseRate) {
  SceneSpec s;
  s.seed = 5;
  s.noise_prob = 0.3;
  s.noise_magnitude = 0.1;
  s.min_objects = 4;
  s.max_objects = 4;
  s.image_size = 128;
  s.max_size = 0.2;
  const Dataset d = gen_dataset(s, 2500);
  int total = 0, changed = 0;
  for (const Sample& smp : d.samples) {
    for (std::size_t n = 0; n < smp.labels.size(); ++n) {
      ++total;
      changed += !(smp.labels[n] == smp.rendered[n]);
    }
  }
  ASSERT_GE(total, 10000);
  EXPECT_NEAR(static_cast<double>(changed) / total, 0.3, 0.02);
}

TEST(Scene, RejectsImpossibleSizes) {
  SceneSpec s;
  s.min_size = 0.5;
  s.max_size = 0.4;
  EXPECT_THROW(s.validate(), ValidationError);
  s.min_size = 0.001;
  s.max_size = 0.4;
  EXPECT_THROW(s.validate(), ValidationError);
  s = SceneSpec{};
  s.max_size = 1.5;
  EXPECT_THROW(s.validate(), ValidationError);
}

TEST(Scene, WriteReadRoundTrip) {
  SceneSpec s;
  s.seed = 9;
  const Dataset d = gen_dataset(s, 6);
  const auto dir = tmp_dir("roundtrip");
  write_dataset(d, dir);
  const Dataset back = read_dataset(dir);
  ASSERT_EQ(back.samples.size(), d.samples.size());
  for (std::size_t n = 0; n < d.samples.size(); ++n) {
    EXPECT_EQ(back.samples[n].image_id, d.samples[n].image_id);
    EXPECT_EQ(back.samples[n].image, d.samples[n].image);
    EXPECT_EQ(back.samples[n].labels, d.samples[n].labels);
  }
}
