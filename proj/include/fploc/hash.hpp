#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace fploc {

// FNV-1a 64-bit. Used for dataset/artifact provenance in run manifests,
// not for anything security-sensitive.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h);

// Streams the file through fnv1a64; returns "fnv1a64:<16 hex digits>".
// Throws IoError if the file cannot be read.
std::string hash_file(const std::string& path);

}  // namespace fploc
