#include "gausshead/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <utility>

#include "gausshead/error.hpp"
#include "gausshead/rng.hpp"
#include "json_util.hpp"

namespace gausshead {

using detail::json;
using detail::ordered_json;

void ModelConfig::validate() const {
  const std::pair<const char*, int> fields[] = {
      {"grid.W", grid.cols},          {"grid.H", grid.rows},
      {"grid.K", grid.anchors},       {"grid.C", grid.classes},
      {"grid.IW", grid.image_width},  {"grid.IH", grid.image_height}};
  for (const auto& [name, value] : fields) {
    if (value < 1) {
      throw ValidationError(std::string(name) + ": must be >= 1, got " + std::to_string(value));
    }
  }
  if (static_cast<int>(anchors.size()) != grid.anchors) {
    throw ValidationError("anchors: grid.K is " + std::to_string(grid.anchors) +
                          " but " + std::to_string(anchors.size()) + " anchors are listed");
  }
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const Anchor& a = anchors[k];
    if (!(a.w > 0) || !(a.h > 0) || !std::isfinite(a.w) || !std::isfinite(a.h)) {
      throw ValidationError("anchors[" + std::to_string(k) + "]: width and height must be > 0");
    }
  }
  if (static_cast<int>(class_names.size()) != grid.classes) {
    throw ValidationError("classes: grid.C is " + std::to_string(grid.classes) + " but " +
                          std::to_string(class_names.size()) + " class names are listed");
  }
}

ModelConfig parse_config(const std::string& text, const std::string& source) {
  const json doc = detail::parse_json(text, source);
  if (!doc.is_object()) throw ValidationError(source + ": top level must be an object");

  ModelConfig cfg;
  const json& grid = detail::require(doc, "grid", source);
  const std::string where = source + ": grid";
  auto int_field = [&](const char* key) {
    const long long v = detail::get_integer(grid, key, where);
    if (v > std::numeric_limits<int>::max() || v < std::numeric_limits<int>::min()) {
      throw ValidationError(where + "." + key + ": out of range");
    }
    return static_cast<int>(v);
  };
  cfg.grid.cols = int_field("W");
  cfg.grid.rows = int_field("H");
  cfg.grid.anchors = int_field("K");
  cfg.grid.classes = int_field("C");
  cfg.grid.image_width = int_field("IW");
  cfg.grid.image_height = int_field("IH");

  const json& anchors = detail::require(doc, "anchors", source);
  if (!anchors.is_array()) throw ValidationError(source + ": anchors must be an array");
  for (std::size_t k = 0; k < anchors.size(); ++k) {
    const json& a = anchors[k];
    if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number()) {
      throw ValidationError(source + ": anchors[" + std::to_string(k) +
                            "] must be a [width, height] pair");
    }
    cfg.anchors.push_back({a[0].get<double>(), a[1].get<double>()});
  }

  const json& classes = detail::require(doc, "classes", source);
  if (!classes.is_array()) throw ValidationError(source + ": classes must be an array");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (!classes[c].is_string()) {
      throw ValidationError(source + ": classes[" + std::to_string(c) + "] must be a string");
    }
    cfg.class_names.push_back(classes[c].get<std::string>());
  }

  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return cfg;
}

std::string format_config(const ModelConfig& cfg) {
  ordered_json doc;
  doc["grid"] = {{"W", cfg.grid.cols},       {"H", cfg.grid.rows},
                 {"K", cfg.grid.anchors},    {"C", cfg.grid.classes},
                 {"IW", cfg.grid.image_width}, {"IH", cfg.grid.image_height}};
  ordered_json anchors = ordered_json::array();
  for (const Anchor& a : cfg.anchors) anchors.push_back({a.w, a.h});
  doc["anchors"] = std::move(anchors);
  doc["classes"] = cfg.class_names;
  return doc.dump(2) + "\n";
}

ModelConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open config file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

void save_config(const ModelConfig& cfg, const std::filesystem::path& path) {
  cfg.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write config file");
  out << format_config(cfg);
}

// ---------------------------------------------------------------------------
// k-means over box shapes

namespace {

struct Shape {
  double w;
  double h;
};

double distance(const Shape& s, const Anchor& c) noexcept {
  return 1.0 - shape_iou(s.w, s.h, c.w, c.h);
}

// Returns the objective (mean distance) for a fixed assignment.
double objective(std::span<const Shape> shapes, std::span<const int> assign,
                 std::span<const Anchor> centroids) {
  double sum = 0.0;
  for (std::size_t n = 0; n < shapes.size(); ++n) {
    sum += distance(shapes[n], centroids[static_cast<std::size_t>(assign[n])]);
  }
  return sum / static_cast<double>(shapes.size());
}

// Nearest centroid, ties to the lowest index.
int nearest(const Shape& s, std::span<const Anchor> centroids) {
  int best = 0;
  double best_d = distance(s, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = distance(s, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

KmeansResult kmeans_anchors(std::span<const Box> boxes, const KmeansOptions& opts) {
  if (boxes.empty()) throw ValidationError("kmeans: boxes must not be empty");
  if (opts.k < 1) throw ValidationError("kmeans: k must be >= 1");
  if (opts.image_width < 1 || opts.image_height < 1) {
    throw ValidationError("kmeans: image size must be >= 1");
  }
  if (opts.max_iters < 1) throw ValidationError("kmeans: max_iters must be >= 1");

  std::vector<Shape> shapes;
  shapes.reserve(boxes.size());
  std::vector<std::pair<double, double>> distinct;
  for (std::size_t n = 0; n < boxes.size(); ++n) {
    const Shape s{boxes[n].w * opts.image_width, boxes[n].h * opts.image_height};
    if (!(s.w > 0) || !(s.h > 0) || !std::isfinite(s.w) || !std::isfinite(s.h)) {
      throw ValidationError("kmeans: box " + std::to_string(n) + " has zero area");
    }
    shapes.push_back(s);
    distinct.emplace_back(s.w, s.h);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (static_cast<std::size_t>(opts.k) > distinct.size()) {
    throw ValidationError("kmeans: k = " + std::to_string(opts.k) + " exceeds the " +
                          std::to_string(distinct.size()) + " distinct box sizes");
  }

  const std::size_t n_boxes = shapes.size();
  const auto k = static_cast<std::size_t>(opts.k);

  // Seeded partial Fisher-Yates: k boxes without replacement.
  Rng rng(child_seed(opts.seed, "kmeans/init"));
  std::vector<std::size_t> order(n_boxes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t c = 0; c < k; ++c) {
    const auto pick = static_cast<std::size_t>(
        uniform_int(rng, static_cast<std::int64_t>(c), static_cast<std::int64_t>(n_boxes - 1)));
    std::swap(order[c], order[pick]);
  }
  std::vector<Anchor> centroids(k);
  for (std::size_t c = 0; c < k; ++c) centroids[c] = {shapes[order[c]].w, shapes[order[c]].h};

  KmeansResult result;
  std::vector<int> assign(n_boxes, -1);
  std::vector<int> next(n_boxes);

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    for (std::size_t n = 0; n < n_boxes; ++n) next[n] = nearest(shapes[n], centroids);

    // Re-seed empty clusters from the point farthest from its centroid.
    std::vector<std::size_t> counts(k, 0);
    for (int a : next) ++counts[static_cast<std::size_t>(a)];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t n = 0; n < n_boxes; ++n) {
        if (counts[static_cast<std::size_t>(next[n])] <= 1) continue;
        const double d = distance(shapes[n], centroids[static_cast<std::size_t>(next[n])]);
        if (d > far_d) {
          far_d = d;
          far = n;
        }
      }
      --counts[static_cast<std::size_t>(next[far])];
      centroids[c] = {shapes[far].w, shapes[far].h};
      next[far] = static_cast<int>(c);
      counts[c] = 1;
    }

    const bool unchanged = next == assign;
    assign = next;
    if (unchanged) {
      result.converged = true;
      break;
    }

    const double before = objective(shapes, assign, centroids);
    std::vector<Anchor> updated(k, Anchor{0.0, 0.0});
    for (std::size_t n = 0; n < n_boxes; ++n) {
      auto& u = updated[static_cast<std::size_t>(assign[n])];
      u.w += shapes[n].w;
      u.h += shapes[n].h;
    }
    for (std::size_t c = 0; c < k; ++c) {
      updated[c].w /= static_cast<double>(counts[c]);
      updated[c].h /= static_cast<double>(counts[c]);
    }
    // The member mean is not the exact minimizer of the IOU distance; keep
    // the objective monotone by refusing an update that would raise it.
    const double after = objective(shapes, assign, updated);
    ++result.iterations;
    if (after > before) {
      result.objective.push_back(before);
      result.converged = true;
      break;
    }
    centroids = std::move(updated);
    result.objective.push_back(after);
  }

  std::sort(centroids.begin(), centroids.end(), [](const Anchor& a, const Anchor& b) {
    const double aa = a.w * a.h;
    const double ba = b.w * b.h;
    if (aa != ba) return aa < ba;
    return a.w < b.w;
  });
  result.anchors = std::move(centroids);
  return result;
}

}  // namespace gausshead
