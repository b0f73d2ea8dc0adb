#pragma once

// Little-endian primitives shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "oodret/error.hpp"

namespace oodret::le {

template <typename T>
T byteswap(T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
void put(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Reads one value; `what` names the field in the truncation error.
template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw Error(Errc::truncated, std::string("file truncated while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  return value;
}

/// Bulk array of arithmetic values.
template <typename T>
void put_array(std::ostream& out, const T* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  } else {
    for (std::size_t i = 0; i < count; ++i) put(out, data[i]);
  }
}

template <typename T>
void get_array(std::istream& in, T* data, std::size_t count, const char* what) {
  const auto bytes = static_cast<std::streamsize>(count * sizeof(T));
  in.read(reinterpret_cast<char*>(data), bytes);
  if (in.gcount() != bytes) throw Error(Errc::truncated, std::string("file truncated in ") + what);
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    for (std::size_t i = 0; i < count; ++i) data[i] = byteswap(data[i]);
  }
}

}  // namespace oodret::le
