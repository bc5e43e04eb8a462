#include "txl/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "txl/errors.hpp"

namespace txl::config {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

}  // namespace

KeyValueFile KeyValueFile::parse_string(const std::string& text, const std::string& origin) {
  KeyValueFile file;
  file.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(strip_comment(line));
    if (stripped.empty()) continue;
    if (stripped.front() == '[') {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": sections are not supported; use flat keys");
    }
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected `key = value`");
    }
    const std::string key = trim(stripped.substr(0, eq));
    std::string value = trim(stripped.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    }
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    if (file.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key `" + key + "`");
    }
    file.values_[key] = value;
  }
  return file;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_string(text, path);
}

bool KeyValueFile::has(const std::string& key) const {
  read_.insert(key);
  return values_.count(key) != 0;
}

const std::string& KeyValueFile::raw(const std::string& key) const {
  read_.insert(key);
  const auto it = values_.find(key);
  if (it == values_.end()) {
    throw ConfigError(origin_ + ": missing required key `" + key + "`");
  }
  return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) const { return raw(key); }

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

std::int64_t KeyValueFile::get_int(const std::string& key) const {
  const std::string& text = raw(key);
  try {
    std::size_t used = 0;
    const std::int64_t value = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key `" + key + "` is not an integer: " + text);
  }
}

std::int64_t KeyValueFile::get_int(const std::string& key, std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KeyValueFile::get_double(const std::string& key) const {
  const std::string& text = raw(key);
  try {
    std::size_t used = 0;
    const double value = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return value;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": key `" + key + "` is not a number: " + text);
  }
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

bool KeyValueFile::get_bool(const std::string& key) const {
  const std::string& text = raw(key);
  if (text == "true") return true;
  if (text == "false") return false;
  throw ConfigError(origin_ + ": key `" + key + "` must be true or false, got " + text);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<std::string> KeyValueFile::unread_keys() const {
  std::vector<std::string> unread;
  for (const auto& [key, value] : values_) {
    if (!read_.count(key)) unread.push_back(key);
  }
  return unread;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::string token;
  std::istringstream in(text);
  while (std::getline(in, token, ',')) {
    const std::string trimmed = trim(token);
    if (trimmed.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stoi(trimmed, &used));
      if (used != trimmed.size()) throw std::invalid_argument(trimmed);
    } catch (const std::exception&) {
      throw ConfigError("expected a comma-separated integer list, got `" + text + "`");
    }
  }
  if (values.empty()) throw ConfigError("expected a non-empty integer list, got `" + text + "`");
  return values;
}

}  // namespace txl::config
