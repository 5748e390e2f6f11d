#pragma once

// Little-endian primitives shared by the sample and parameter file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "wavecast/error.hpp"

namespace wavecast::binio {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_f64s(std::ostream& out, const std::vector<double>& values) {
  write_u64(out, values.size());
  for (double v : values) write_f64(out, v);
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error(Errc::FormatError, "unexpected end of file");
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  read_exact(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  read_exact(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

inline std::vector<double> read_f64s(std::istream& in, std::uint64_t max_len = 1ull << 32) {
  const auto n = read_u64(in);
  if (n > max_len) throw Error(Errc::FormatError, "implausible array length");
  std::vector<double> values(n);
  for (auto& v : values) v = read_f64(in);
  return values;
}

inline std::string read_string(std::istream& in) {
  const auto n = read_u32(in);
  if (n > (1u << 20)) throw Error(Errc::FormatError, "implausible string length");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

}  // namespace wavecast::binio
