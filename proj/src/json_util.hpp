#pragma once

// Checked accessors over nlohmann::json that raise SchemaError with a field path.

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "ttc/error.hpp"

namespace ttc::detail {

using json = nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing required field");
  return *it;
}

inline std::string join(const std::string& path, const char* key) { return path + "." + key; }

inline long long get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  return j.get<long long>();
}

inline int get_count(const json& j, const std::string& path, int min_value = 0) {
  const long long v = get_int(j, path);
  if (v < min_value || v > (1LL << 30)) {
    throw SchemaError(path, "value " + std::to_string(v) + " out of range");
  }
  return static_cast<int>(v);
}

inline double get_real(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw SchemaError(path, "expected a boolean");
  return j.get<bool>();
}

inline std::vector<double> get_reals(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_real(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline std::vector<int> get_ints(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of integers");
  std::vector<int> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(static_cast<int>(get_int(j[i], path + "[" + std::to_string(i) + "]")));
  }
  return out;
}

inline std::vector<std::string> get_strings(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_string(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError(what, std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace ttc::detail
