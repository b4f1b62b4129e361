#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

// Little-endian primitives for the on-disk formats (graph store,
// checkpoints). Reads throw on truncation instead of returning garbage.

namespace walklm {

namespace detail {
template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));  // host is little-endian; format says LE
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error(std::string("truncated file while reading ") + what);
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void write_u8(std::ostream& os, uint8_t v) { detail::write_le(os, v); }
inline void write_u16(std::ostream& os, uint16_t v) { detail::write_le(os, v); }
inline void write_u32(std::ostream& os, uint32_t v) { detail::write_le(os, v); }
inline void write_u64(std::ostream& os, uint64_t v) { detail::write_le(os, v); }
inline void write_f32(std::ostream& os, float v) { detail::write_le(os, v); }
inline void write_f64(std::ostream& os, double v) { detail::write_le(os, v); }

inline uint8_t read_u8(std::istream& is, const char* what) { return detail::read_le<uint8_t>(is, what); }
inline uint16_t read_u16(std::istream& is, const char* what) { return detail::read_le<uint16_t>(is, what); }
inline uint32_t read_u32(std::istream& is, const char* what) { return detail::read_le<uint32_t>(is, what); }
inline uint64_t read_u64(std::istream& is, const char* what) { return detail::read_le<uint64_t>(is, what); }
inline float read_f32(std::istream& is, const char* what) { return detail::read_le<float>(is, what); }
inline double read_f64(std::istream& is, const char* what) { return detail::read_le<double>(is, what); }

inline void write_string(std::ostream& os, const std::string& s) {
  write_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& is, const char* what) {
  uint32_t n = read_u32(is, what);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw std::runtime_error(std::string("truncated file while reading ") + what);
  return s;
}

// Length-prefixed array of fixed-width scalars.
template <typename T>
void write_array(std::ostream& os, const std::vector<T>& v) {
  write_u64(os, v.size());
  for (const T& x : v) detail::write_le(os, x);
}

template <typename T>
std::vector<T> read_array(std::istream& is, const char* what) {
  uint64_t n = read_u64(is, what);
  std::vector<T> v(n);
  for (uint64_t i = 0; i < n; ++i) v[i] = detail::read_le<T>(is, what);
  return v;
}

}  // namespace walklm
