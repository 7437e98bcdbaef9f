#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gausshead/encoding.hpp"
#include "gausshead/eval.hpp"

namespace gausshead {

/// Synthetic scene generator settings. Objects are filled axis-aligned
/// rectangles on a dark background; the class is coded by fill intensity.
struct SceneSpec {
  int image_size = 64;          ///< square images, pixels
  int min_objects = 1;
  int max_objects = 4;
  int classes = 3;
  double min_size = 0.12;       ///< box side range as a fraction of the image
  double max_size = 0.4;
  double noise_prob = 0.0;      ///< probability that a label is jittered
  double noise_magnitude = 0.1; ///< jitter amplitude relative to box size
  double pixel_noise = 12.0;    ///< uniform +-amplitude on 8-bit intensities
  std::uint64_t seed = 0;

  /// Throws ValidationError, e.g. for size ranges that cannot fit.
  void validate() const;
};

/// 8-bit grayscale image, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const Image&, const Image&) = default;
};

struct Sample {
  std::string image_id;
  Image image;
  std::vector<GroundTruth> labels;    ///< annotations (possibly jittered)
  std::vector<GroundTruth> rendered;  ///< exact rendered rectangles
};

struct Dataset {
  std::vector<Sample> samples;

  [[nodiscard]] AnnotationSet annotations() const;
  [[nodiscard]] AnnotationSet rendered_annotations() const;
};

/// Background level and per-class fill intensity.
inline constexpr int kBackgroundLevel = 40;
[[nodiscard]] int class_intensity(int class_id, int classes) noexcept;

/// Deterministic for a fixed spec. Image n depends only on (seed, n), so a
/// prefix of a larger dataset equals the smaller dataset.
[[nodiscard]] Dataset gen_dataset(const SceneSpec& spec, int n_images);

/// Writes images/<id>.pgm (binary P5) and annotations.jsonl.
void write_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Reads a directory written by write_dataset. `rendered` is left empty.
[[nodiscard]] Dataset read_dataset(const std::filesystem::path& dir);

void write_pgm(const Image& img, const std::filesystem::path& path);
[[nodiscard]] Image read_pgm(const std::filesystem::path& path);

}  // namespace gausshead
