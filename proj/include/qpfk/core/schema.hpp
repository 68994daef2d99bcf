#pragma once

#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace qpfk {

/// A configuration error tied to the JSON path of the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(std::string path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

namespace schema {

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
inline std::string join(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

inline const nlohmann::json& at(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(join(path, key), "missing required field");
  return *it;
}

template <class T>
T get(const nlohmann::json& j, const std::string& key, const std::string& path) {
  const auto& v = at(j, key, path);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw SchemaError(join(path, key), "wrong type");
  }
}

template <class T>
T get_or(const nlohmann::json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key, path);
}

inline double positive(double v, const std::string& path) {
  if (!(v > 0)) throw SchemaError(path, "must be positive");
  return v;
}

inline double non_negative(double v, const std::string& path) {
  if (!(v >= 0)) throw SchemaError(path, "must be non-negative");
  return v;
}

}  // namespace schema
}  // namespace qpfk
