#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gausshead/config.hpp"
#include "gausshead/head.hpp"
#include "gausshead/scene.hpp"

namespace gausshead {

/// Version tag of the model file format.
inline constexpr int kModelFormatVersion = 1;

enum class HeadMode {
  kGaussian,       ///< 9 + C channels per anchor, NLL box loss
  kDeterministic,  ///< 5 + C channels per anchor, squared-error box loss
};

[[nodiscard]] const char* to_string(HeadMode mode) noexcept;
/// Accepts "gaussian" or "deterministic"; throws ValidationError otherwise.
[[nodiscard]] HeadMode parse_head_mode(const std::string& s);

/// Backbone: a stack of 3x3 conv + ReLU stages; a 2x2 average pool follows
/// each of the first log2(image / grid) stages. A 1x1 conv head follows.
struct BackboneSpec {
  std::vector<int> channels = {8, 16, 16, 32};

  friend bool operator==(const BackboneSpec&, const BackboneSpec&) = default;
};

/// Tiny fully convolutional detector with exact hand-written gradients.
class ToyModel {
 public:
  /// Activations retained by forward() for backward().
  struct Cache {
    std::vector<std::vector<double>> inputs;  // padded stage inputs
    std::vector<std::vector<double>> relu;    // post-ReLU stage outputs
    std::vector<double> features;             // head input
  };

  ToyModel(ModelConfig cfg, HeadMode mode, BackboneSpec backbone, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] HeadMode mode() const noexcept { return mode_; }
  [[nodiscard]] const BackboneSpec& backbone() const noexcept { return backbone_; }

  [[nodiscard]] std::span<double> parameters() noexcept { return params_; }
  [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
  [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
  /// Weights + biases of the 1x1 head.
  [[nodiscard]] std::size_t head_parameter_count() const noexcept;
  /// Output channels of the head (= head_param_count of the grid).
  [[nodiscard]] int head_channels() const noexcept;

  /// Runs the network; the result is always in the Gaussian field layout.
  /// In deterministic mode the variance logits are pinned to the lower clamp.
  /// Throws DimensionError if the image size differs from IW x IH.
  [[nodiscard]] RawGrid forward(const Image& image, Cache* cache = nullptr) const;

  /// Accumulates d loss / d parameters into `param_grad` given the gradient
  /// w.r.t. the raw grid. Variance-logit gradients are ignored in
  /// deterministic mode.
  void backward(const Cache& cache, const RawGrid& raw_grad, std::span<double> param_grad) const;

  void save(const std::filesystem::path& path) const;
  [[nodiscard]] static ToyModel load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_json() const;
  [[nodiscard]] static ToyModel from_json(const std::string& text, const std::string& source);

 private:
  struct Stage {
    int in_ch, out_ch;
    int size_w, size_h;  // spatial size of the stage input (= conv output)
    bool pool;
    std::size_t w_off, b_off;
  };

  void build_layout();
  void initialize(std::uint64_t seed);
  [[nodiscard]] int fields_out() const noexcept;
  [[nodiscard]] int channel_to_field(int field_in_anchor) const noexcept;

  ModelConfig cfg_;
  HeadMode mode_;
  BackboneSpec backbone_;
  std::vector<Stage> stages_;
  std::size_t head_w_off_ = 0;
  std::size_t head_b_off_ = 0;
  int feature_depth_ = 0;
  std::vector<double> params_;
};

}  // namespace gausshead
