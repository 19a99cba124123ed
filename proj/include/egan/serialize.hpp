#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace egan {

// Little-endian fixed-width integer I/O for versioned binary files.
void write_u64_le(std::ostream& os, uint64_t v);
// Throws CorruptionError naming `context` when the stream runs dry.
uint64_t read_u64_le(std::istream& is, const char* context);

// Doubles travel as the 16 lowercase hex characters of their bit pattern so
// round trips are exact.
std::string double_to_hex(double v);
double hex_to_double(const std::string& s, const char* context);

// FNV-1a over the bytes of `data`; used as a content digest in checkpoints.
uint64_t fnv1a64(const std::string& data);

}  // namespace egan
