#include "gausshead/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "gausshead/error.hpp"
#include "json_util.hpp"

namespace gausshead {

using detail::json;
using detail::ordered_json;

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) { return json(v).dump(); }

namespace {

template <typename Fn>
void for_each_record(std::istream& in, const std::string& source, Fn&& fn) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const json rec = detail::parse_json(line, source, lineno);
    if (!rec.is_object()) throw ValidationError(where + ": record must be a JSON object");
    try {
      fn(rec, where);
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      if (msg.rfind(where, 0) == 0) throw;
      throw ValidationError(where + ": " + msg);
    }
  }
}

int get_class(const json& rec, const std::string& where) {
  const long long c = detail::get_integer(rec, "class_id", where);
  if (c < 0 || c > std::numeric_limits<int>::max()) {
    throw ValidationError(where + ": class_id must be a non-negative integer");
  }
  return static_cast<int>(c);
}

Box get_box(const json& rec, const std::string& where) {
  return {detail::get_number(rec, "cx", where), detail::get_number(rec, "cy", where),
          detail::get_number(rec, "w", where), detail::get_number(rec, "h", where)};
}

}  // namespace

AnnotationSet parse_annotations(std::istream& in, const std::string& source) {
  AnnotationSet set;
  for_each_record(in, source, [&](const json& rec, const std::string& where) {
    GroundTruth gt{get_class(rec, where), get_box(rec, where)};
    validate_ground_truth(gt);
    set[detail::get_string(rec, "image_id", where)].push_back(gt);
  });
  return set;
}

AnnotationSet read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open annotations");
  return parse_annotations(in, path.string());
}

void write_annotations(std::ostream& out, const AnnotationSet& set) {
  for (const auto& [image, list] : set) {
    for (const GroundTruth& g : list) {
      ordered_json rec;
      rec["image_id"] = image;
      rec["class_id"] = g.class_id;
      rec["cx"] = g.box.cx;
      rec["cy"] = g.box.cy;
      rec["w"] = g.box.w;
      rec["h"] = g.box.h;
      out << rec.dump() << '\n';
    }
  }
}

DetectionSet parse_detections(std::istream& in, const std::string& source) {
  DetectionSet set;
  for_each_record(in, source, [&](const json& rec, const std::string& where) {
    Detection d;
    d.class_id = get_class(rec, where);
    d.score = detail::get_number(rec, "score", where);
    d.box = get_box(rec, where);
    d.uncertainty = rec.contains("uncertainty") ? detail::get_number(rec, "uncertainty", where)
                                                : 0.0;
    if (!(d.score >= 0 && d.score <= 1)) throw ValidationError(where + ": score must be in [0, 1]");
    if (!is_valid(d.box)) throw ValidationError(where + ": box must have finite w, h >= 0");
    set[detail::get_string(rec, "image_id", where)].push_back(d);
  });
  return set;
}

DetectionSet read_detections(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open detections");
  return parse_detections(in, path.string());
}

void write_detections(std::ostream& out, const DetectionSet& set) {
  for (const auto& [image, list] : set) {
    for (const Detection& d : list) {
      ordered_json rec;
      rec["image_id"] = image;
      rec["class_id"] = d.class_id;
      rec["score"] = d.score;
      rec["cx"] = d.box.cx;
      rec["cy"] = d.box.cy;
      rec["w"] = d.box.w;
      rec["h"] = d.box.h;
      rec["uncertainty"] = d.uncertainty;
      out << rec.dump() << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Feature maps

namespace {

constexpr std::size_t kMaxHeaderBytes = 4096;
constexpr long long kMaxDimension = 1 << 16;

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

RawGrid read_feature_map(std::istream& in, const std::string& source) {
  std::string header;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '\n') break;
    header.push_back(ch);
    if (header.size() > kMaxHeaderBytes) {
      throw ParseError(source + ": feature-map header line exceeds " +
                       std::to_string(kMaxHeaderBytes) + " bytes");
    }
  }
  if (ch != '\n') throw ParseError(source + ": feature-map header is not newline-terminated");
  const json h = detail::parse_json(header, source + " (header)");
  if (!h.is_object()) throw ParseError(source + ": feature-map header must be a JSON object");
  const std::string where = source + ": header";
  auto dim = [&](const char* key, long long min) {
    const long long v = detail::get_integer(h, key, where);
    if (v < min || v > kMaxDimension) {
      throw ParseError(where + ": " + key + " = " + std::to_string(v) + " out of range");
    }
    return static_cast<int>(v);
  };
  const int w = dim("W", 1);
  const int hh = dim("H", 1);
  const int k = dim("K", 1);
  const int c = dim("C", 0);
  const std::string dtype = detail::get_string(h, "dtype", where);
  if (dtype != "f32le") {
    throw ParseError(where + ": unsupported dtype '" + dtype + "' (expected f32le)");
  }

  RawGrid grid(w, hh, k, c);
  const std::size_t expected = grid.size() * sizeof(float);
  std::vector<char> payload(expected);
  in.read(payload.data(), static_cast<std::streamsize>(expected));
  if (static_cast<std::size_t>(in.gcount()) != expected) {
    throw ParseError(source + ": payload has " + std::to_string(in.gcount()) +
                     " bytes, header implies " + std::to_string(expected));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(source + ": trailing bytes after " + std::to_string(expected) +
                     "-byte payload");
  }
  auto values = grid.values();
  for (std::size_t n = 0; n < values.size(); ++n) {
    std::uint32_t bits;
    std::memcpy(&bits, payload.data() + n * 4, 4);
    values[n] = static_cast<double>(std::bit_cast<float>(to_little(bits)));
  }
  return grid;
}

RawGrid read_feature_map(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": cannot open feature map");
  return read_feature_map(in, path.string());
}

void write_feature_map(std::ostream& out, const RawGrid& grid) {
  ordered_json h;
  h["W"] = grid.cols();
  h["H"] = grid.rows();
  h["K"] = grid.anchors();
  h["C"] = grid.classes();
  h["dtype"] = "f32le";
  out << h.dump() << '\n';
  for (double v : grid.values()) {
    const std::uint32_t bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    char buf[4];
    std::memcpy(buf, &bits, 4);
    out.write(buf, 4);
  }
}

void write_feature_map(const std::filesystem::path& path, const RawGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path.string() + ": cannot write feature map");
  write_feature_map(out, grid);
}

}  // namespace gausshead
