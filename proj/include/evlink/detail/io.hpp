#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "evlink/errors.hpp"

namespace evlink::detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

inline std::size_t line_of_offset(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

// Parses `text` as JSON; errors name the source and line.
inline nlohmann::json parse_json(const std::string& text, const std::string& source,
                                 std::size_t base_line = 1) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t line = base_line - 1 + line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ParseError(source + ":" + std::to_string(line) + ": " + e.what());
  }
}

// Typed field access with a dotted path in the error message.
template <typename T>
T get_field(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + "." + key + ": missing field");
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(where + "." + key + ": wrong type");
  }
}

// Absent or null yields an empty string with `present` false.
inline bool get_optional_string(const nlohmann::json& obj, const char* key,
                                const std::string& where, std::string& out) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return false;
  if (!it->is_string()) throw ParseError(where + "." + key + ": expected string or null");
  out = it->get<std::string>();
  return true;
}

}  // namespace evlink::detail
