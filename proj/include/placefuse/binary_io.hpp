#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "placefuse/errors.hpp"

namespace placefuse::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written by direct little-endian copies");

template <typename T>
void write(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

inline void write_bytes(std::ostream& os, std::string_view bytes) {
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
T read(std::istream& is, const char* what) {
  T value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!is) throw FormatError(std::string("unexpected end of file while reading ") + what);
  return value;
}

inline std::string read_bytes(std::istream& is, std::size_t n, const char* what) {
  std::string out(n, '\0');
  is.read(out.data(), static_cast<std::streamsize>(n));
  if (!is) throw FormatError(std::string("unexpected end of file while reading ") + what);
  return out;
}

inline void expect_magic(std::istream& is, std::string_view magic) {
  const std::string got = read_bytes(is, magic.size(), "magic");
  if (got != magic) {
    throw FormatError("bad magic: expected '" + std::string(magic) + "'");
  }
}

}  // namespace placefuse::binio
