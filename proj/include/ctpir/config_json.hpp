#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "ctpir/errors.hpp"

namespace ctpir::detail {

template <typename T>
inline constexpr bool is_count_v = std::is_unsigned_v<T> && !std::is_same_v<T, bool>;

// Reads `key` into `field` when present. Unsigned fields reject negative
// numbers, which nlohmann would otherwise wrap around.
template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  auto check = [&](const nlohmann::json& x) {
    if (!x.is_number_unsigned()) throw ConfigError(std::string(key) + " must be a non-negative integer");
  };
  if constexpr (is_count_v<T>) {
    check(v);
  } else if constexpr (requires { typename T::value_type; } && !std::is_same_v<T, std::string>) {
    if constexpr (is_count_v<typename T::value_type>) {
      if (!v.is_array()) throw ConfigError(std::string(key) + " must be an array");
      for (const auto& x : v) check(x);
    }
  }
  field = v.get<T>();
}

// Every key of `j` must also appear in `known` (a serialized default).
inline void reject_unknown_keys(const nlohmann::json& j, const nlohmann::json& known, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown " + what + " key '" + key + "'");
  }
}

}  // namespace ctpir::detail
