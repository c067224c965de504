#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "superinfo/errors.hpp"

namespace superinfo::io {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename U>
concept PodScalar = std::is_arithmetic_v<U> && !std::is_same_v<U, bool>;

template <PodScalar U>
U byteswap_if_big(U v) {
  if constexpr (std::endian::native == std::endian::little || sizeof(U) == 1) {
    return v;
  } else {
    std::array<uint8_t, sizeof(U)> b;
    std::memcpy(b.data(), &v, sizeof(U));
    for (size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(b[i], b[sizeof(U) - 1 - i]);
    std::memcpy(&v, b.data(), sizeof(U));
    return v;
  }
}

/// Writes one value in little-endian byte order.
template <PodScalar U>
void write_le(std::ostream& out, U v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

/// Reads one little-endian value; throws FormatError::TruncatedPayload on EOF.
template <PodScalar U>
U read_le(std::istream& in, const char* what) {
  U v;
  in.read(reinterpret_cast<char*>(&v), sizeof(U));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(U))) {
    throw FormatError(FormatError::Code::TruncatedPayload,
                      std::string("truncated while reading ") + what);
  }
  return byteswap_if_big(v);
}

inline void write_bytes(std::ostream& out, const void* data, size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

inline void read_bytes(std::istream& in, void* data, size_t n, const char* what) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n));
  if (in.gcount() != static_cast<std::streamsize>(n)) {
    throw FormatError(FormatError::Code::TruncatedPayload,
                      std::string("truncated while reading ") + what);
  }
}

/// Reads a 4-byte magic and compares it; throws FormatError::MagicMismatch.
inline void expect_magic(std::istream& in, const char (&magic)[5]) {
  char got[4];
  in.read(got, 4);
  if (in.gcount() != 4 || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(FormatError::Code::MagicMismatch,
                      std::string("expected file magic '") + magic + "'");
  }
}

inline void write_magic(std::ostream& out, const char (&magic)[5]) {
  out.write(magic, 4);
}

}  // namespace superinfo::io
