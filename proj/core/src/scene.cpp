#include "gausshead/scene.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gausshead/error.hpp"
#include "gausshead/io.hpp"
#include "gausshead/rng.hpp"

namespace gausshead {

void SceneSpec::validate() const {
  if (image_size < 4) throw ValidationError("scene.image_size: must be >= 4");
  if (min_objects < 0 || max_objects < min_objects) {
    throw ValidationError("scene.objects: need 0 <= min_objects <= max_objects");
  }
  if (classes < 1) throw ValidationError("scene.classes: must be >= 1");
  if (!(min_size > 0) || !(max_size >= min_size)) {
    throw ValidationError("scene.size: need 0 < min_size <= max_size");
  }
  if (max_size > 1.0) throw ValidationError("scene.max_size: boxes larger than the image cannot fit");
  if (std::lround(min_size * image_size) < 1) {
    throw ValidationError("scene.min_size: rounds to less than one pixel");
  }
  if (!(noise_prob >= 0 && noise_prob <= 1)) {
    throw ValidationError("scene.noise_prob: must be in [0, 1]");
  }
  if (!(noise_magnitude >= 0 && noise_magnitude < 1)) {
    throw ValidationError("scene.noise_magnitude: must be in [0, 1)");
  }
  if (!(pixel_noise >= 0 && pixel_noise < 40)) {
    throw ValidationError("scene.pixel_noise: must be in [0, 40)");
  }
}

int class_intensity(int class_id, int classes) noexcept {
  constexpr int lo = 110;
  constexpr int hi = 230;
  if (classes <= 1) return hi;
  return lo + (hi - lo) * class_id / (classes - 1);
}

AnnotationSet Dataset::annotations() const {
  AnnotationSet set;
  for (const Sample& s : samples) {
    if (!s.labels.empty()) set[s.image_id] = s.labels;
  }
  return set;
}

AnnotationSet Dataset::rendered_annotations() const {
  AnnotationSet set;
  for (const Sample& s : samples) {
    if (!s.rendered.empty()) set[s.image_id] = s.rendered;
  }
  return set;
}

namespace {

struct PixelRect {
  int x1, y1, w, h;  // covers [x1, x1 + w) x [y1, y1 + h)
};

bool overlaps_with_gap(const PixelRect& a, const PixelRect& b) {
  return a.x1 - 1 < b.x1 + b.w && b.x1 - 1 < a.x1 + a.w && a.y1 - 1 < b.y1 + b.h &&
         b.y1 - 1 < a.y1 + a.h;
}

Box jitter(const Box& b, double magnitude, Rng& rng) {
  const double cx = b.cx + uniform(rng, -magnitude, magnitude) * b.w;
  const double cy = b.cy + uniform(rng, -magnitude, magnitude) * b.h;
  const double w = b.w * (1.0 + uniform(rng, -magnitude, magnitude));
  const double h = b.h * (1.0 + uniform(rng, -magnitude, magnitude));
  Corners c{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
  c.x1 = std::clamp(c.x1, 0.0, 1.0);
  c.y1 = std::clamp(c.y1, 0.0, 1.0);
  c.x2 = std::clamp(c.x2, 0.0, 1.0);
  c.y2 = std::clamp(c.y2, 0.0, 1.0);
  return Box::from_corners(c);
}

Sample render(const SceneSpec& spec, int index) {
  Rng rng(child_seed(spec.seed, "scene/image", static_cast<std::uint64_t>(index)));
  Rng noise_rng(child_seed(spec.seed, "scene/label-noise", static_cast<std::uint64_t>(index)));
  const int size = spec.image_size;
  const int min_px = static_cast<int>(std::lround(spec.min_size * size));
  const int max_px = std::min(size, static_cast<int>(std::lround(spec.max_size * size)));

  char id[32];
  std::snprintf(id, sizeof id, "img_%06d", index);
  Sample s;
  s.image_id = id;
  s.image.width = size;
  s.image.height = size;

  const auto n_objects = static_cast<int>(uniform_int(rng, spec.min_objects, spec.max_objects));
  std::vector<std::pair<PixelRect, int>> placed;
  for (int o = 0; o < n_objects; ++o) {
    const auto cls = static_cast<int>(uniform_int(rng, 0, spec.classes - 1));
    for (int attempt = 0; attempt < 100; ++attempt) {
      PixelRect r{};
      r.w = static_cast<int>(uniform_int(rng, min_px, max_px));
      r.h = static_cast<int>(uniform_int(rng, min_px, max_px));
      r.x1 = static_cast<int>(uniform_int(rng, 0, size - r.w));
      r.y1 = static_cast<int>(uniform_int(rng, 0, size - r.h));
      const bool clash = std::any_of(placed.begin(), placed.end(), [&](const auto& p) {
        return overlaps_with_gap(r, p.first);
      });
      if (!clash) {
        placed.emplace_back(r, cls);
        break;
      }
    }
  }

  std::vector<int> level(static_cast<std::size_t>(size) * size, kBackgroundLevel);
  for (const auto& [r, cls] : placed) {
    const int v = class_intensity(cls, spec.classes);
    for (int y = r.y1; y < r.y1 + r.h; ++y) {
      for (int x = r.x1; x < r.x1 + r.w; ++x) level[static_cast<std::size_t>(y) * size + x] = v;
    }
    const Box box = Box::from_corners({static_cast<double>(r.x1) / size,
                                       static_cast<double>(r.y1) / size,
                                       static_cast<double>(r.x1 + r.w) / size,
                                       static_cast<double>(r.y1 + r.h) / size});
    s.rendered.push_back({cls, box});
    Box label = box;
    if (spec.noise_prob > 0 && uniform01(noise_rng) < spec.noise_prob) {
      label = jitter(box, spec.noise_magnitude, noise_rng);
    }
    s.labels.push_back({cls, label});
  }

  s.image.pixels.resize(level.size());
  const auto amp = static_cast<int>(std::floor(spec.pixel_noise));
  for (std::size_t p = 0; p < level.size(); ++p) {
    const int noise = amp > 0 ? static_cast<int>(uniform_int(rng, -amp, amp)) : 0;
    s.image.pixels[p] = static_cast<std::uint8_t>(std::clamp(level[p] + noise, 0, 255));
  }
  return s;
}

}  // namespace

Dataset gen_dataset(const SceneSpec& spec, int n_images) {
  spec.validate();
  if (n_images < 0) throw ValidationError("gen_dataset: n_images must be >= 0");
  Dataset data;
  data.samples.reserve(static_cast<std::size_t>(n_images));
  for (int n = 0; n < n_images; ++n) data.samples.push_back(render(spec, n));
  return data;
}

void write_pgm(const Image& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write image");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
}

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open image");
  auto token = [&]() {
    std::string t;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(c);
    }
    return t;
  };
  if (token() != "P5") throw ParseError(path.string() + ": not a binary PGM (P5)");
  Image img;
  int maxval = 0;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw ParseError(path.string() + ": malformed PGM header");
  }
  if (img.width < 1 || img.height < 1 || maxval < 1 || maxval > 255) {
    throw ParseError(path.string() + ": unsupported PGM geometry or maxval");
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw ParseError(path.string() + ": truncated PGM payload");
  }
  return img;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  for (const Sample& s : data.samples) write_pgm(s.image, dir / "images" / (s.image_id + ".pgm"));
  std::ofstream ann(dir / "annotations.jsonl", std::ios::binary);
  if (!ann) throw Error((dir / "annotations.jsonl").string() + ": cannot write");
  write_annotations(ann, data.annotations());
}

Dataset read_dataset(const std::filesystem::path& dir) {
  const auto images_dir = dir / "images";
  if (!std::filesystem::is_directory(images_dir)) {
    throw ValidationError(dir.string() + ": missing images/ directory");
  }
  const AnnotationSet ann = read_annotations(dir / "annotations.jsonl");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(images_dir)) {
    if (e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Dataset data;
  for (const auto& f : files) {
    Sample s;
    s.image_id = f.stem().string();
    s.image = read_pgm(f);
    if (const auto it = ann.find(s.image_id); it != ann.end()) s.labels = it->second;
    data.samples.push_back(std::move(s));
  }
  for (const auto& [id, list] : ann) {
    if (!std::filesystem::exists(images_dir / (id + ".pgm"))) {
      throw ValidationError(dir.string() + ": annotations reference missing image '" + id + "'");
    }
  }
  return data;
}

}  // namespace gausshead
