#include "kinfuse/config.hpp"

#include <cstdio>

#include "kinfuse/error.hpp"
#include "kinfuse/io.hpp"
#include "kinfuse/text.hpp"

namespace kinfuse {

namespace {

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view contents, std::string_view origin) {
  KeyValueConfig cfg;
  std::string section;
  auto lines = io::split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto line = text::normalize_whitespace(strip_comment(lines[i]));
    if (line.empty()) continue;
    auto where = std::string(origin) + ":" + std::to_string(i + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      section = text::normalize_whitespace(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
    auto key = text::normalize_whitespace(line.substr(0, eq));
    auto value = text::normalize_whitespace(line.substr(eq + 1));
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    cfg.values_[section.empty() ? key : section + "." + key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  return parse(io::read_file(path), path.string());
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used == v->size()) return d;
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + std::string(key) + "' is not a number: " + *v);
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long n = std::stoll(*v, &used);
    if (used == v->size()) return n;
  } catch (const std::exception&) {
  }
  throw ValidationError("config key '" + std::string(key) + "' is not an integer: " + *v);
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  auto s = text::to_lower(*v);
  if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "off" || s == "0" || s == "no") return false;
  throw ValidationError("config key '" + std::string(key) + "' is not a boolean: " + *v);
}

std::string KeyValueConfig::fingerprint() const {
  std::uint64_t h = text::fnv1a("kinfuse-config");
  for (const auto& [k, v] : values_) {
    h = text::fnv1a(k, h);
    h = text::fnv1a("=", h);
    h = text::fnv1a(v, h);
    h = text::fnv1a("\n", h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace kinfuse
