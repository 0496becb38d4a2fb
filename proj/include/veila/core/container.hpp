#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "veila/core/common.hpp"
#include "veila/core/tensor.hpp"

namespace veila {

// The repository's single tensor container: fixed 8-byte magic, a version in
// the magic, dtype code, shape, an embedded JSON metadata blob, then the
// row-major little-endian payload.
//
//   magic   char[8]  "VLTENS01"
//   dtype   u32      1=f32 2=f64 3=i32 4=u8
//   ndim    u32
//   dims    u64[ndim]
//   mlen    u64      metadata byte count
//   meta    char[mlen]  UTF-8 JSON
//   payload dtype[prod(dims)]
static_assert(std::endian::native == std::endian::little,
              "container io assumes a little-endian host");

namespace container {

constexpr char kMagic[8] = {'V', 'L', 'T', 'E', 'N', 'S', '0', '1'};

template <class T>
constexpr u32 dtype_code() {
  if constexpr (std::is_same_v<T, float>) return 1;
  if constexpr (std::is_same_v<T, double>) return 2;
  if constexpr (std::is_same_v<T, i32>) return 3;
  if constexpr (std::is_same_v<T, u8>) return 4;
}

inline size_t dtype_size(u32 code) {
  switch (code) {
    case 1: return 4;
    case 2: return 8;
    case 3: return 4;
    case 4: return 1;
    default: VEILA_CHECK(false, "unknown dtype code " + std::to_string(code));
  }
  return 0;
}

}  // namespace container

template <class T>
void write_tensor(const std::string& path, const Tensor<T>& t,
                  const nlohmann::json& meta = nlohmann::json::object()) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write " + path);
  f.write(container::kMagic, 8);
  u32 dtype = container::dtype_code<T>();
  u32 ndim = u32(t.ndim());
  f.write(reinterpret_cast<const char*>(&dtype), 4);
  f.write(reinterpret_cast<const char*>(&ndim), 4);
  for (i64 d : t.shape()) {
    u64 v = u64(d);
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  std::string m = meta.dump();
  u64 mlen = m.size();
  f.write(reinterpret_cast<const char*>(&mlen), 8);
  f.write(m.data(), std::streamsize(m.size()));
  f.write(reinterpret_cast<const char*>(t.data()), std::streamsize(size_t(t.numel()) * sizeof(T)));
  VEILA_CHECK(f.good(), "short write: " + path);
}

struct TensorFile {
  u32 dtype = 0;
  std::vector<i64> shape;
  nlohmann::json meta;
  std::vector<char> payload;

  template <class T>
  Tensor<T> as() const {
    VEILA_CHECK(dtype == container::dtype_code<T>(),
                "dtype mismatch: stored code " + std::to_string(dtype));
    Tensor<T> t(shape);
    std::memcpy(t.data(), payload.data(), payload.size());
    return t;
  }

  // Reads f32/f64 payloads into whichever float type the caller wants.
  template <class T>
  Tensor<T> as_floating() const {
    if (dtype == 1) return as<float>().template cast<T>();
    if (dtype == 2) return as<double>().template cast<T>();
    VEILA_CHECK(false, "not a floating tensor");
    return {};
  }
};

inline TensorFile read_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VEILA_CHECK(f.good(), "cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  VEILA_CHECK(f.good() && std::memcmp(magic, container::kMagic, 8) == 0,
              "bad magic in " + path);
  TensorFile tf;
  u32 ndim = 0;
  f.read(reinterpret_cast<char*>(&tf.dtype), 4);
  f.read(reinterpret_cast<char*>(&ndim), 4);
  VEILA_CHECK(f.good() && ndim <= 8, "corrupt header in " + path);
  i64 numel = 1;
  for (u32 i = 0; i < ndim; ++i) {
    u64 d = 0;
    f.read(reinterpret_cast<char*>(&d), 8);
    tf.shape.push_back(i64(d));
    numel *= i64(d);
  }
  u64 mlen = 0;
  f.read(reinterpret_cast<char*>(&mlen), 8);
  VEILA_CHECK(f.good() && mlen < (1ull << 30), "corrupt metadata length in " + path);
  std::string m(mlen, '\0');
  f.read(m.data(), std::streamsize(mlen));
  tf.meta = mlen ? nlohmann::json::parse(m) : nlohmann::json::object();
  size_t bytes = size_t(numel) * container::dtype_size(tf.dtype);
  tf.payload.resize(bytes);
  f.read(tf.payload.data(), std::streamsize(bytes));
  VEILA_CHECK(f.good(), "truncated payload in " + path);
  return tf;
}

template <class T>
Tensor<T> read_tensor(const std::string& path) {
  return read_tensor_file(path).as<T>();
}

}  // namespace veila
