#include "placefuse/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "placefuse/errors.hpp"

namespace placefuse {
namespace {

void split(std::string_view line, std::vector<std::string_view>& out) {
  out.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
}

}  // namespace

CsvReader::CsvReader(const std::filesystem::path& path,
                     std::initializer_list<std::string_view> header)
    : path_(path), in_(path), columns_(header.size()) {
  if (!in_) throw InputError("cannot open " + path.string());
  std::vector<std::string_view> fields;
  while (std::getline(in_, line_)) {
    ++line_number_;
    if (line_.empty() || line_[0] == '#') continue;
    split(line_, fields);
    if (fields.size() != header.size() || !std::equal(header.begin(), header.end(), fields.begin())) {
      std::string expected;
      for (auto h : header) expected += (expected.empty() ? "" : ",") + std::string(h);
      fail("expected header '" + expected + "'");
    }
    return;
  }
  fail("missing header");
}

bool CsvReader::next(std::vector<std::string_view>& fields) {
  while (std::getline(in_, line_)) {
    ++line_number_;
    if (line_.empty() || line_[0] == '#' || line_ == "\r") continue;
    split(line_, fields);
    if (fields.size() != columns_) {
      fail("expected " + std::to_string(columns_) + " fields, got " + std::to_string(fields.size()));
    }
    return true;
  }
  return false;
}

double CsvReader::to_double(std::string_view field) const {
  const std::string s(field);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail("not a number: '" + s + "'");
  return v;
}

std::uint64_t CsvReader::to_u64(std::string_view field) const {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    fail("not an unsigned integer: '" + std::string(field) + "'");
  }
  return v;
}

void CsvReader::fail(const std::string& what) const {
  throw FormatError(path_.string() + ":" + std::to_string(line_number_) + ": " + what);
}

}  // namespace placefuse
