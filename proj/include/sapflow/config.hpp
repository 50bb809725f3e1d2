#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sapflow {

/// Flat `key = value` configuration, as read from a UTF-8 text file.
///
/// Lines starting with `#` and trailing `# ...` are comments. Keys are kept in
/// insertion order so that a serialized config reads back in the same layout.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  /// Removes `key` if present; returns whether it was.
  bool erase(const std::string& key);

  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Throws ConfigError naming the first key not contained in `known`.
  void require_known(const std::set<std::string>& known) const;

  std::string to_string() const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

/// Shortest decimal representation that parses back to the identical double.
std::string format_double(double value);

/// Strict full-string parse; throws ConfigError mentioning `what` on failure.
double parse_double(std::string_view text, std::string_view what);

}  // namespace sapflow
