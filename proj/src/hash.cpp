#include "fploc/hash.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "fploc/exceptions.hpp"

namespace fploc {

std::string hash_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file: " + path);
  std::array<char, 1 << 16> buf;
  std::uint64_t h = 0xcbf29ce484222325ull;
  while (in) {
    in.read(buf.data(), buf.size());
    const std::streamsize got = in.gcount();
    if (got > 0) h = fnv1a64(buf.data(), static_cast<std::size_t>(got), h);
  }
  return hash_hex(h);
}

}  // namespace fploc
