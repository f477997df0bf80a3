#pragma once

// Little-endian primitives for the FTTX / FTUP container formats.

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "freqtune/common.hpp"

namespace freqtune::binary {

inline void write_u8(std::ostream& os, std::uint8_t v) {
  os.put(static_cast<char>(v));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void write_f64(std::ostream& os, double v) {
  write_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline void write_magic(std::ostream& os, std::string_view magic) {
  os.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

class Reader {
 public:
  Reader(std::istream& is, std::string source)
      : is_(is), source_(std::move(source)) {}

  void expect_magic(std::string_view magic) {
    std::string got(magic.size(), '\0');
    is_.read(got.data(), static_cast<std::streamsize>(got.size()));
    if (!is_ || got != magic)
      throw FormatError(source_ + ": bad magic bytes (expected \"" +
                        std::string(magic) + "\")");
  }

  std::uint8_t u8(const char* field) {
    unsigned char b = 0;
    read(&b, 1, field);
    return b;
  }

  std::uint32_t u32(const char* field) {
    std::array<unsigned char, 4> b{};
    read(b.data(), 4, field);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  std::uint64_t u64(const char* field) {
    std::array<unsigned char, 8> b{};
    read(b.data(), 8, field);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }

  double f64(const char* field) { return std::bit_cast<double>(u64(field)); }

  void expect_end() {
    if (is_.peek() != std::char_traits<char>::eof())
      throw FormatError(source_ + ": trailing bytes after payload");
  }

  const std::string& source() const { return source_; }

 private:
  void read(unsigned char* dst, std::size_t n, const char* field) {
    is_.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (!is_)
      throw FormatError(source_ + ": truncated while reading " + field);
  }

  std::istream& is_;
  std::string source_;
};

}  // namespace freqtune::binary
