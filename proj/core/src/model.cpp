#include "gausshead/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gausshead/error.hpp"
#include "gausshead/rng.hpp"
#include "json_util.hpp"

namespace gausshead {

using detail::json;
using detail::ordered_json;

const char* to_string(HeadMode mode) noexcept {
  return mode == HeadMode::kGaussian ? "gaussian" : "deterministic";
}

HeadMode parse_head_mode(const std::string& s) {
  if (s == "gaussian") return HeadMode::kGaussian;
  if (s == "deterministic") return HeadMode::kDeterministic;
  throw ValidationError("mode: expected 'gaussian' or 'deterministic', got '" + s + "'");
}

namespace {

constexpr int kKernel = 3;
constexpr int kTaps = kKernel * kKernel;

int log2_exact(int num, int den) {
  if (den <= 0 || num % den != 0) return -1;
  int ratio = num / den;
  int p = 0;
  while (ratio > 1) {
    if (ratio % 2 != 0) return -1;
    ratio /= 2;
    ++p;
  }
  return p;
}

}  // namespace

ToyModel::ToyModel(ModelConfig cfg, HeadMode mode, BackboneSpec backbone, std::uint64_t seed)
    : cfg_(std::move(cfg)), mode_(mode), backbone_(std::move(backbone)) {
  cfg_.validate();
  build_layout();
  initialize(seed);
}

void ToyModel::build_layout() {
  const GridSpec& g = cfg_.grid;
  const int px = log2_exact(g.image_width, g.cols);
  const int py = log2_exact(g.image_height, g.rows);
  if (px < 0 || px != py) {
    throw ValidationError("model: image size must be the grid size times a common power of two");
  }
  if (backbone_.channels.size() < static_cast<std::size_t>(px) || backbone_.channels.empty()) {
    throw ValidationError("model.backbone: needs at least " + std::to_string(std::max(px, 1)) +
                          " stages to reach the grid resolution");
  }
  std::size_t off = 0;
  int in_ch = 1;
  int w = g.image_width;
  int h = g.image_height;
  stages_.clear();
  for (std::size_t s = 0; s < backbone_.channels.size(); ++s) {
    const int out_ch = backbone_.channels[s];
    if (out_ch < 1) throw ValidationError("model.backbone: channel counts must be >= 1");
    Stage st{in_ch, out_ch, w, h, s < static_cast<std::size_t>(px), 0, 0};
    st.w_off = off;
    off += static_cast<std::size_t>(out_ch) * in_ch * kTaps;
    st.b_off = off;
    off += static_cast<std::size_t>(out_ch);
    stages_.push_back(st);
    in_ch = out_ch;
    if (st.pool) {
      w /= 2;
      h /= 2;
    }
  }
  feature_depth_ = in_ch;
  head_w_off_ = off;
  off += static_cast<std::size_t>(head_channels()) * feature_depth_;
  head_b_off_ = off;
  off += static_cast<std::size_t>(head_channels());
  params_.assign(off, 0.0);
}

void ToyModel::initialize(std::uint64_t seed) {
  Rng backbone_rng(child_seed(seed, "model/backbone"));
  for (const Stage& st : stages_) {
    const double std_dev = std::sqrt(2.0 / (st.in_ch * kTaps));
    for (std::size_t n = 0; n < static_cast<std::size_t>(st.out_ch) * st.in_ch * kTaps; ++n) {
      params_[st.w_off + n] = std_dev * standard_normal(backbone_rng);
    }
  }
  Rng head_rng(child_seed(seed, "model/head"));
  const double head_std = 0.1 / std::sqrt(static_cast<double>(feature_depth_));
  for (std::size_t n = 0; n < static_cast<std::size_t>(head_channels()) * feature_depth_; ++n) {
    params_[head_w_off_ + n] = head_std * standard_normal(head_rng);
  }
  // Objectness starts near a 2% prior so early training is not dominated by
  // the many empty slots.
  const int per_anchor = fields_out();
  const int obj_channel = mode_ == HeadMode::kGaussian ? field_index(Field::kObj) : 4;
  for (int k = 0; k < cfg_.grid.anchors; ++k) {
    params_[head_b_off_ + static_cast<std::size_t>(k * per_anchor + obj_channel)] = -4.0;
  }
}

int ToyModel::fields_out() const noexcept {
  return mode_ == HeadMode::kGaussian ? fields_per_anchor(cfg_.grid.classes)
                                      : 5 + cfg_.grid.classes;
}

int ToyModel::head_channels() const noexcept {
  return static_cast<int>(head_param_count(cfg_.grid, mode_ == HeadMode::kGaussian));
}

std::size_t ToyModel::head_parameter_count() const noexcept {
  return static_cast<std::size_t>(head_channels()) * (feature_depth_ + 1);
}

int ToyModel::channel_to_field(int f) const noexcept {
  if (mode_ == HeadMode::kGaussian) return f;
  static constexpr Field kBox[] = {Field::kMuX, Field::kMuY, Field::kMuW, Field::kMuH, Field::kObj};
  if (f < 5) return field_index(kBox[f]);
  return field_index(Field::kClass0) + (f - 5);
}

RawGrid ToyModel::forward(const Image& image, Cache* cache) const {
  const GridSpec& g = cfg_.grid;
  if (image.width != g.image_width || image.height != g.image_height) {
    throw DimensionError("model: image is " + std::to_string(image.width) + "x" +
                         std::to_string(image.height) + ", expected " +
                         std::to_string(g.image_width) + "x" + std::to_string(g.image_height));
  }
  Cache local;
  Cache& c = cache ? *cache : local;
  c.inputs.resize(stages_.size());
  c.relu.resize(stages_.size());

  // Stage 0 input: padded, normalized pixels.
  {
    const Stage& st = stages_[0];
    const int pw = st.size_w + 2;
    auto& xp = c.inputs[0];
    xp.assign(static_cast<std::size_t>(pw) * (st.size_h + 2), 0.0);
    for (int y = 0; y < st.size_h; ++y) {
      for (int x = 0; x < st.size_w; ++x) {
        xp[static_cast<std::size_t>(y + 1) * pw + x + 1] =
            (image.pixels[static_cast<std::size_t>(y) * st.size_w + x] - 128.0) / 128.0;
      }
    }
  }

  for (std::size_t s = 0; s < stages_.size(); ++s) {
    const Stage& st = stages_[s];
    const int W = st.size_w;
    const int H = st.size_h;
    const int pw = W + 2;
    const std::size_t plane = static_cast<std::size_t>(W) * H;
    const std::size_t pplane = static_cast<std::size_t>(pw) * (H + 2);
    const auto& xp = c.inputs[s];
    auto& z = c.relu[s];
    z.assign(plane * st.out_ch, 0.0);
    const double* wts = params_.data() + st.w_off;
    for (int o = 0; o < st.out_ch; ++o) {
      double* zo = z.data() + plane * o;
      std::fill(zo, zo + plane, params_[st.b_off + o]);
      for (int i = 0; i < st.in_ch; ++i) {
        const double* xi = xp.data() + pplane * i;
        const double* wk = wts + (static_cast<std::size_t>(o) * st.in_ch + i) * kTaps;
        for (int ky = 0; ky < kKernel; ++ky) {
          for (int kx = 0; kx < kKernel; ++kx) {
            const double wv = wk[ky * kKernel + kx];
            for (int y = 0; y < H; ++y) {
              double* __restrict zr = zo + static_cast<std::size_t>(y) * W;
              const double* __restrict xr = xi + static_cast<std::size_t>(y + ky) * pw + kx;
              for (int x = 0; x < W; ++x) zr[x] += wv * xr[x];
            }
          }
        }
      }
      for (std::size_t n = 0; n < plane; ++n) zo[n] = zo[n] > 0.0 ? zo[n] : 0.0;
    }

    // Stage output (optionally pooled) goes to the next padded input or the head.
    const int ow = st.pool ? W / 2 : W;
    const int oh = st.pool ? H / 2 : H;
    const bool last = s + 1 == stages_.size();
    const int opw = last ? ow : ow + 2;
    const int pad = last ? 0 : 1;
    std::vector<double>& dst = last ? c.features : c.inputs[s + 1];
    dst.assign(static_cast<std::size_t>(opw) * (oh + 2 * pad) * st.out_ch, 0.0);
    const std::size_t oplane = static_cast<std::size_t>(opw) * (oh + 2 * pad);
    for (int o = 0; o < st.out_ch; ++o) {
      const double* zo = z.data() + plane * o;
      double* d = dst.data() + oplane * o;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          double v;
          if (st.pool) {
            const std::size_t r0 = static_cast<std::size_t>(2 * y) * W + 2 * x;
            v = 0.25 * (zo[r0] + zo[r0 + 1] + zo[r0 + W] + zo[r0 + W + 1]);
          } else {
            v = zo[static_cast<std::size_t>(y) * W + x];
          }
          d[static_cast<std::size_t>(y + pad) * opw + x + pad] = v;
        }
      }
    }
  }

  // 1x1 head.
  const int cells = g.cols * g.rows;
  const int channels = head_channels();
  const int per_anchor = fields_out();
  RawGrid raw(g);
  if (mode_ == HeadMode::kDeterministic) {
    for (int j = 0; j < g.rows; ++j) {
      for (int i = 0; i < g.cols; ++i) {
        for (int k = 0; k < g.anchors; ++k) {
          for (Field f : {Field::kSigX, Field::kSigY, Field::kSigW, Field::kSigH}) {
            raw.at(i, j, k, f) = -kVarianceLogitClamp;
          }
        }
      }
    }
  }
  std::vector<double> out(static_cast<std::size_t>(cells));
  for (int ch = 0; ch < channels; ++ch) {
    std::fill(out.begin(), out.end(), params_[head_b_off_ + ch]);
    const double* wr = params_.data() + head_w_off_ + static_cast<std::size_t>(ch) * feature_depth_;
    for (int d = 0; d < feature_depth_; ++d) {
      const double wv = wr[d];
      const double* f = c.features.data() + static_cast<std::size_t>(d) * cells;
      for (int n = 0; n < cells; ++n) out[static_cast<std::size_t>(n)] += wv * f[n];
    }
    const int k = ch / per_anchor;
    const int field = channel_to_field(ch % per_anchor);
    for (int n = 0; n < cells; ++n) {
      raw.at(n % g.cols, n / g.cols, k, field) = out[static_cast<std::size_t>(n)];
    }
  }
  return raw;
}

void ToyModel::backward(const Cache& c, const RawGrid& raw_grad,
                        std::span<double> param_grad) const {
  const GridSpec& g = cfg_.grid;
  raw_grad.check_matches(g);
  if (param_grad.size() != params_.size()) {
    throw DimensionError("model: gradient buffer has " + std::to_string(param_grad.size()) +
                         " entries, expected " + std::to_string(params_.size()));
  }
  const int cells = g.cols * g.rows;
  const int channels = head_channels();
  const int per_anchor = fields_out();

  // Head.
  std::vector<double> dfeat(static_cast<std::size_t>(feature_depth_) * cells, 0.0);
  std::vector<double> dout(static_cast<std::size_t>(cells));
  for (int ch = 0; ch < channels; ++ch) {
    const int k = ch / per_anchor;
    const int field = channel_to_field(ch % per_anchor);
    double bias_grad = 0.0;
    for (int n = 0; n < cells; ++n) {
      dout[static_cast<std::size_t>(n)] = raw_grad.at(n % g.cols, n / g.cols, k, field);
      bias_grad += dout[static_cast<std::size_t>(n)];
    }
    param_grad[head_b_off_ + ch] += bias_grad;
    const std::size_t wrow = head_w_off_ + static_cast<std::size_t>(ch) * feature_depth_;
    for (int d = 0; d < feature_depth_; ++d) {
      const double* f = c.features.data() + static_cast<std::size_t>(d) * cells;
      double* df = dfeat.data() + static_cast<std::size_t>(d) * cells;
      const double wv = params_[wrow + d];
      double acc = 0.0;
#pragma omp simd reduction(+ : acc)
      for (int n = 0; n < cells; ++n) {
        acc += dout[static_cast<std::size_t>(n)] * f[n];
        df[n] += wv * dout[static_cast<std::size_t>(n)];
      }
      param_grad[wrow + d] += acc;
    }
  }

  // Backbone, last stage first. `upstream` is d loss / d stage output
  // (unpadded, after pooling when the stage pools).
  std::vector<double> upstream = std::move(dfeat);
  std::vector<double> dz;
  std::vector<double> dxp;
  for (std::size_t s = stages_.size(); s-- > 0;) {
    const Stage& st = stages_[s];
    const int W = st.size_w;
    const int H = st.size_h;
    const int pw = W + 2;
    const std::size_t plane = static_cast<std::size_t>(W) * H;
    const std::size_t pplane = static_cast<std::size_t>(pw) * (H + 2);
    const int ow = st.pool ? W / 2 : W;
    const auto& relu = c.relu[s];
    const auto& xp = c.inputs[s];

    dz.assign(plane * st.out_ch, 0.0);
    for (int o = 0; o < st.out_ch; ++o) {
      const double* up = upstream.data() + static_cast<std::size_t>(o) * ow * (st.pool ? H / 2 : H);
      double* dzo = dz.data() + plane * o;
      const double* ro = relu.data() + plane * o;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          const std::size_t n = static_cast<std::size_t>(y) * W + x;
          const double u = st.pool ? 0.25 * up[static_cast<std::size_t>(y / 2) * ow + x / 2] : up[n];
          dzo[n] = ro[n] > 0.0 ? u : 0.0;
        }
      }
    }

    const bool need_input_grad = s > 0;
    if (need_input_grad) dxp.assign(pplane * st.in_ch, 0.0);
    const double* wts = params_.data() + st.w_off;
    double* gw = param_grad.data() + st.w_off;
    for (int o = 0; o < st.out_ch; ++o) {
      const double* dzo = dz.data() + plane * o;
      double bsum = 0.0;
#pragma omp simd reduction(+ : bsum)
      for (std::size_t n = 0; n < plane; ++n) bsum += dzo[n];
      param_grad[st.b_off + o] += bsum;
      for (int i = 0; i < st.in_ch; ++i) {
        const double* xi = xp.data() + pplane * i;
        double* dxi = need_input_grad ? dxp.data() + pplane * i : nullptr;
        const std::size_t wbase = (static_cast<std::size_t>(o) * st.in_ch + i) * kTaps;
        for (int ky = 0; ky < kKernel; ++ky) {
          for (int kx = 0; kx < kKernel; ++kx) {
            const double wv = wts[wbase + ky * kKernel + kx];
            double acc = 0.0;
            for (int y = 0; y < H; ++y) {
              const double* __restrict dr = dzo + static_cast<std::size_t>(y) * W;
              const double* __restrict xr = xi + static_cast<std::size_t>(y + ky) * pw + kx;
#pragma omp simd reduction(+ : acc)
              for (int x = 0; x < W; ++x) acc += dr[x] * xr[x];
              if (dxi) {
                double* __restrict dxr = dxi + static_cast<std::size_t>(y + ky) * pw + kx;
                for (int x = 0; x < W; ++x) dxr[x] += wv * dr[x];
              }
            }
            gw[wbase + ky * kKernel + kx] += acc;
          }
        }
      }
    }

    if (need_input_grad) {
      // Strip padding: gradient w.r.t. the previous stage's (pooled) output.
      upstream.assign(plane * st.in_ch, 0.0);
      for (int i = 0; i < st.in_ch; ++i) {
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            upstream[plane * i + static_cast<std::size_t>(y) * W + x] =
                dxp[pplane * i + static_cast<std::size_t>(y + 1) * pw + x + 1];
          }
        }
      }
    }
  }
}

std::string ToyModel::to_json() const {
  ordered_json doc;
  doc["format"] = "gausshead-model";
  doc["version"] = kModelFormatVersion;
  doc["mode"] = to_string(mode_);
  doc["backbone"] = backbone_.channels;
  doc["config"] = ordered_json::parse(format_config(cfg_));
  doc["parameters"] = params_;
  return doc.dump() + "\n";
}

ToyModel ToyModel::from_json(const std::string& text, const std::string& source) {
  const json doc = detail::parse_json(text, source);
  if (!doc.is_object() || doc.value("format", "") != "gausshead-model") {
    throw ParseError(source + ": not a gausshead model file");
  }
  if (detail::get_integer(doc, "version", source) != kModelFormatVersion) {
    throw ParseError(source + ": unsupported model version");
  }
  const HeadMode mode = parse_head_mode(detail::get_string(doc, "mode", source));
  BackboneSpec bb;
  const json& channels = detail::require(doc, "backbone", source);
  if (!channels.is_array()) throw ParseError(source + ": backbone must be an array");
  bb.channels.clear();
  for (const json& v : channels) {
    if (!v.is_number_integer()) throw ParseError(source + ": backbone entries must be integers");
    bb.channels.push_back(v.get<int>());
  }
  ModelConfig cfg = parse_config(detail::require(doc, "config", source).dump(), source + " (config)");
  ToyModel model(std::move(cfg), mode, std::move(bb), 0);
  const json& params = detail::require(doc, "parameters", source);
  if (!params.is_array() || params.size() != model.params_.size()) {
    throw ParseError(source + ": expected " + std::to_string(model.params_.size()) +
                     " parameters");
  }
  for (std::size_t n = 0; n < params.size(); ++n) {
    if (!params[n].is_number()) throw ParseError(source + ": parameters must be numbers");
    model.params_[n] = params[n].get<double>();
  }
  return model;
}

void ToyModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write model");
  out << to_json();
}

ToyModel ToyModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open model");
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str(), path.string());
}

}  // namespace gausshead
