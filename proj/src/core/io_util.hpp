#ifndef SENTIFUSE_CORE_IO_UTIL_HPP
#define SENTIFUSE_CORE_IO_UTIL_HPP

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>

// Little-endian binary primitives shared by the feature-file and checkpoint
// formats. Writers always succeed or set the stream's fail state; readers
// report truncation through their return value so callers can raise errors
// with file context attached.
namespace sentifuse::ioutil {

inline void put_u32(std::ostream& out, uint32_t v) {
  const char bytes[4] = {
      static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
      static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

inline void put_u64(std::ostream& out, uint64_t v) {
  put_u32(out, static_cast<uint32_t>(v & 0xffffffffu));
  put_u32(out, static_cast<uint32_t>(v >> 32));
}

inline void put_f32(std::ostream& out, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

inline void put_f64(std::ostream& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

inline bool get_u32(std::istream& in, uint32_t& v) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) return false;
  v = static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
      (static_cast<uint32_t>(bytes[2]) << 16) |
      (static_cast<uint32_t>(bytes[3]) << 24);
  return true;
}

inline bool get_u64(std::istream& in, uint64_t& v) {
  uint32_t lo = 0;
  uint32_t hi = 0;
  if (!get_u32(in, lo) || !get_u32(in, hi)) return false;
  v = static_cast<uint64_t>(lo) | (static_cast<uint64_t>(hi) << 32);
  return true;
}

inline bool get_f32(std::istream& in, float& v) {
  uint32_t bits = 0;
  if (!get_u32(in, bits)) return false;
  std::memcpy(&v, &bits, 4);
  return true;
}

inline bool get_f64(std::istream& in, double& v) {
  uint64_t bits = 0;
  if (!get_u64(in, bits)) return false;
  std::memcpy(&v, &bits, 8);
  return true;
}

}  // namespace sentifuse::ioutil

#endif
