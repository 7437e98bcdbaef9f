#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "gausshead/eval.hpp"
#include "gausshead/head.hpp"

namespace gausshead {

/// Version tag of the on-disk formats below.
inline constexpr const char* kFormatVersion = "1";

// Annotations: JSON Lines, one object per line,
//   {"image_id": str, "class_id": int, "cx": f, "cy": f, "w": f, "h": f}
// Every record is validated; degenerate boxes are rejected here.

[[nodiscard]] AnnotationSet parse_annotations(std::istream& in, const std::string& source);
[[nodiscard]] AnnotationSet read_annotations(const std::filesystem::path& path);
void write_annotations(std::ostream& out, const AnnotationSet& set);

// Detections: JSON Lines,
//   {"image_id", "class_id", "score", "cx", "cy", "w", "h", "uncertainty"}

[[nodiscard]] DetectionSet parse_detections(std::istream& in, const std::string& source);
[[nodiscard]] DetectionSet read_detections(const std::filesystem::path& path);
void write_detections(std::ostream& out, const DetectionSet& set);

// Raw feature map: one JSON header line
//   {"W":..,"H":..,"K":..,"C":..,"dtype":"f32le"}
// followed by H*W*K*(9+C) little-endian float32 values in (j, i, k, field)
// order. The header is fully validated before any payload is read.

[[nodiscard]] RawGrid read_feature_map(std::istream& in, const std::string& source);
[[nodiscard]] RawGrid read_feature_map(const std::filesystem::path& path);
void write_feature_map(std::ostream& out, const RawGrid& grid);
void write_feature_map(const std::filesystem::path& path, const RawGrid& grid);

/// Reads a whole file; throws ValidationError if it cannot be opened.
[[nodiscard]] std::string read_text_file(const std::filesystem::path& path);

/// Formats a double with the shortest round-trip representation.
[[nodiscard]] std::string format_double(double v);

}  // namespace gausshead
