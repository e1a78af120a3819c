#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace placefuse {

/// Flat `key = value` configuration. Lines starting with '#' are comments.
/// Later assignments override earlier ones.
class Config {
 public:
  static Config from_file(const std::filesystem::path& path);
  static Config from_string(std::string_view text, std::string_view origin = "<string>");

  /// Applies a `key=value` override.
  void set(std::string_view assignment);
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  bool has(std::string_view key) const { return values_.count(std::string(key)) > 0; }

  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  std::size_t get_size(std::string_view key, std::size_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::size_t> get_size_list(std::string_view key,
                                         const std::vector<std::size_t>& fallback) const;
  std::vector<double> get_double_list(std::string_view key,
                                      const std::vector<double>& fallback) const;
  std::vector<std::string> get_string_list(std::string_view key,
                                           const std::vector<std::string>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Every entry as `# key = value` lines, sorted by key.
  std::string echo(std::string_view comment_prefix = "# ") const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace placefuse
