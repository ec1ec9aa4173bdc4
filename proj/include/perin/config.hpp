#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perin {

// Flat `key = value` configuration. Lines starting with '#' and blank lines
// are ignored; surrounding whitespace is trimmed. Later keys override
// earlier ones. List values are comma-separated.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  long get_int(const std::string& key, long fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // All entries whose key starts with `prefix`, with the prefix removed.
  std::map<std::string, std::string> with_prefix(const std::string& prefix) const;

  void set(const std::string& key, const std::string& value) {
    values_[key] = value;
  }
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace perin
