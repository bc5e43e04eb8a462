#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace txl::config {

// Flat `key = value` experiment files (TOML scalar syntax, no sections).
// Strings may be quoted; # starts a comment. Every key an experiment needs
// lives in one diff-able file.
class KeyValueFile {
 public:
  static KeyValueFile parse_file(const std::string& path);
  static KeyValueFile parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Keys present in the file but never read; the CLI treats these as typos.
  std::vector<std::string> unread_keys() const;

 private:
  std::string origin_;
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> read_;

  const std::string& raw(const std::string& key) const;
};

// "16,32,48" -> {16, 32, 48}
std::vector<int> parse_int_list(const std::string& text);

}  // namespace txl::config
