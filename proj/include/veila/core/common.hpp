#pragma once

#include <cstdint>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>

namespace veila {

using i64 = std::int64_t;
using i32 = std::int32_t;
using u64 = std::uint64_t;
using u32 = std::uint32_t;
using u8 = std::uint8_t;

namespace detail {
[[noreturn]] inline void check_failed(const char* expr, const std::string& msg,
                                      const char* file, int line) {
  std::ostringstream os;
  os << file << ":" << line << ": check failed: " << expr;
  if (!msg.empty()) os << " (" << msg << ")";
  throw std::runtime_error(os.str());
}
}  // namespace detail

// Contract: when set, math runs on a single BLAS thread and every run with
// the same (config, seed) reproduces outputs byte for byte.
inline bool deterministic_mode() {
  static const bool on = [] {
    const char* v = std::getenv("VEILA_DETERMINISTIC");
    return v != nullptr && v[0] != '\0' && v[0] != '0';
  }();
  return on;
}

}  // namespace veila

#define VEILA_CHECK(cond, msg)                                             \
  do {                                                                     \
    if (!(cond)) ::veila::detail::check_failed(#cond, (msg), __FILE__, __LINE__); \
  } while (0)
