#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "metaems/errors.hpp"

namespace metaems::io {

template <typename T>
void WritePod(std::ostream& out, const T& value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T ReadPod(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("unexpected end of stream");
  return value;
}

inline void WriteDoubles(std::ostream& out, const double* data, std::size_t n) {
  WritePod<std::uint64_t>(out, n);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline std::vector<double> ReadDoubles(std::istream& in, std::uint64_t max_count = (1ULL << 32)) {
  const auto n = ReadPod<std::uint64_t>(in);
  if (n > max_count) throw IoError("implausible array length in stream");
  std::vector<double> data(n);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("unexpected end of stream");
  return data;
}

inline void WriteString(std::ostream& out, const std::string& s) {
  WritePod<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string ReadString(std::istream& in) {
  const auto n = ReadPod<std::uint64_t>(in);
  if (n > (1ULL << 24)) throw IoError("implausible string length in stream");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("unexpected end of stream");
  return s;
}

}  // namespace metaems::io
