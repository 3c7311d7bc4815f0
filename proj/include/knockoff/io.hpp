#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "knockoff/errors.hpp"

namespace knockoff::io {

// Binary files are little-endian with raw IEEE-754 doubles. Round-trips are
// exact by construction.

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");
static_assert(sizeof(double) == 8);

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError(path + ": truncated file");
  return v;
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in, const std::string& path) {
  auto n = read_pod<std::uint32_t>(in, path);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError(path + ": truncated file");
  return s;
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& in, std::vector<double>& v, std::size_t n, const std::string& path) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError(path + ": truncated file");
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  return in;
}

inline void check_magic(std::istream& in, const char (&magic)[5], const std::string& path) {
  char got[4];
  in.read(got, 4);
  if (!in || std::memcmp(got, magic, 4) != 0) throw IoError(path + ": bad magic, not a " + magic + " file");
}

// Writes text atomically enough for our purposes and verifies the stream.
inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace knockoff::io
