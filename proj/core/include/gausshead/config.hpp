#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gausshead/geometry.hpp"

namespace gausshead {

/// Prediction grid and input geometry. JSON keys: W, H, K, C, IW, IH.
struct GridSpec {
  int cols = 1;          ///< W: grid columns
  int rows = 1;          ///< H: grid rows
  int anchors = 1;       ///< K: anchors per cell
  int classes = 1;       ///< C: class count
  int image_width = 1;   ///< IW: resized input width in pixels
  int image_height = 1;  ///< IH: resized input height in pixels

  [[nodiscard]] int slots() const noexcept { return cols * rows * anchors; }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Anchor box prior in pixels.
struct Anchor {
  double w = 0.0;
  double h = 0.0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

struct ModelConfig {
  GridSpec grid;
  std::vector<Anchor> anchors;
  std::vector<std::string> class_names;

  /// Throws ValidationError naming the offending field.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Parses a config document. `source` is only used in error messages.
[[nodiscard]] ModelConfig parse_config(const std::string& text,
                                       const std::string& source = "<config>");
[[nodiscard]] std::string format_config(const ModelConfig& cfg);

[[nodiscard]] ModelConfig load_config(const std::filesystem::path& path);
void save_config(const ModelConfig& cfg, const std::filesystem::path& path);

struct KmeansOptions {
  int k = 9;
  int image_width = 1;
  int image_height = 1;
  std::uint64_t seed = 0;
  int max_iters = 300;
};

struct KmeansResult {
  std::vector<Anchor> anchors;     ///< sorted by area ascending
  std::vector<double> objective;   ///< mean (1 - shape IOU) after each iteration
  int iterations = 0;
  bool converged = false;
};

/// Clusters box shapes (converted to pixels) with distance 1 - shape_iou.
/// Throws ValidationError for empty input, zero-area boxes, or k larger than
/// the number of distinct box sizes.
[[nodiscard]] KmeansResult kmeans_anchors(std::span<const Box> boxes, const KmeansOptions& opts);

}  // namespace gausshead
