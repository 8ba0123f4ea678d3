#pragma once

// Line-oriented `key = value` files. Values use JSON literal syntax
// (integers, reals, booleans, strings, nested arrays); `#` starts a comment.

#include <istream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "r2/error.hpp"

namespace r2::text {

struct Field {
  std::string key;
  nlohmann::json value;
  int line = 0;
};

[[nodiscard]] inline auto trim(std::string s) -> std::string {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[nodiscard]] inline auto parse(std::istream& in, const std::string& source) -> std::vector<Field> {
  std::vector<Field> out;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const auto s = trim(raw);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError(source + ":" + std::to_string(line) + ": expected `key = value`");
    }
    Field f;
    f.key = trim(s.substr(0, eq));
    f.line = line;
    if (f.key.empty()) throw ParseError(source + ":" + std::to_string(line) + ": empty key");
    try {
      f.value = nlohmann::json::parse(trim(s.substr(eq + 1)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + ":" + std::to_string(line) + ": field `" + f.key + "`: bad value (" + e.what() + ")");
    }
    out.push_back(std::move(f));
  }
  return out;
}

[[nodiscard]] inline auto where(const std::string& source, const Field& f) -> std::string {
  return source + ":" + std::to_string(f.line) + ": field `" + f.key + "`";
}

}  // namespace r2::text
