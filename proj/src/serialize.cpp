#include "egan/serialize.hpp"

#include <bit>
#include <istream>
#include <ostream>

#include "egan/errors.hpp"

namespace egan {

void write_u64_le(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t read_u64_le(std::istream& is, const char* context) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (is.gcount() != 8)
    throw CorruptionError(std::string(context) + ": unexpected end of file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string double_to_hex(double v) {
  static const char* digits = "0123456789abcdef";
  uint64_t bits = std::bit_cast<uint64_t>(v);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[bits & 0xf];
    bits >>= 4;
  }
  return out;
}

double hex_to_double(const std::string& s, const char* context) {
  if (s.size() != 16)
    throw CorruptionError(std::string(context) + ": bad hex double '" + s +
                          "'");
  uint64_t bits = 0;
  for (char c : s) {
    int d;
    if (c >= '0' && c <= '9')
      d = c - '0';
    else if (c >= 'a' && c <= 'f')
      d = c - 'a' + 10;
    else
      throw CorruptionError(std::string(context) + ": bad hex double '" + s +
                            "'");
    bits = (bits << 4) | static_cast<uint64_t>(d);
  }
  return std::bit_cast<double>(bits);
}

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace egan
