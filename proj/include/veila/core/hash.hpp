#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "veila/core/common.hpp"

namespace veila {

// FNV-1a 64-bit. Used for manifests and config identities, not security.
inline u64 fnv1a64(const void* bytes, size_t len, u64 h = 0xcbf29ce484222325ull) {
  const u8* p = static_cast<const u8*>(bytes);
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline u64 fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hash_hex(u64 h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline u64 hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VEILA_CHECK(f.good(), "cannot open for hashing: " + path);
  u64 h = 0xcbf29ce484222325ull;
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), std::streamsize(buf.size()));
    h = fnv1a64(buf.data(), size_t(f.gcount()), h);
  }
  return h;
}

}  // namespace veila
