#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace placefuse {

/// Reads a comma-separated file with a fixed header line. Lines starting
/// with '#' are provenance comments and are skipped.
class CsvReader {
 public:
  CsvReader(const std::filesystem::path& path, std::initializer_list<std::string_view> header);

  /// Splits the next data row into `fields`; false at end of file.
  bool next(std::vector<std::string_view>& fields);

  double to_double(std::string_view field) const;
  std::uint64_t to_u64(std::string_view field) const;

 private:
  [[noreturn]] void fail(const std::string& what) const;

  std::filesystem::path path_;
  std::ifstream in_;
  std::string line_;
  std::size_t columns_ = 0;
  std::size_t line_number_ = 0;
};

}  // namespace placefuse
