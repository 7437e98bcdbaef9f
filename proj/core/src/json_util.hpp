#pragma once

// Private helpers shared by the JSON-backed readers.

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "gausshead/error.hpp"

namespace gausshead::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

/// Parses `text`, rethrowing syntax errors as ParseError with `source:line`.
inline json parse_json(const std::string& text, const std::string& source, int base_line = 1) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = base_line + line_of(text, e.byte == 0 ? 0 : e.byte - 1) - 1;
    throw ParseError(source + ":" + std::to_string(line) + ": parse error: " + e.what());
  }
}

inline const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

inline double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number()) throw ValidationError(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline long long get_integer(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    throw ValidationError(where + ": field '" + key + "' must be an integer");
  }
  return v.get<long long>();
}

inline std::string get_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw ValidationError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace gausshead::detail
