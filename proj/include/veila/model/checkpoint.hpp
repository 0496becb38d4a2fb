#pragma once

#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "veila/core/container.hpp"
#include "veila/model/params.hpp"

namespace veila::model {

// Checkpoint container: one file holding a JSON header (configs, schedule,
// encoder seeds, dataset hash, step) and every named parameter tensor, plus
// optional Adam state so training can resume with an identical trajectory.
//
//   magic  char[8] "VLCKPT01"
//   jlen   u64, header JSON bytes
//   n      u32 tensor count
//   n x (u32 name_len, name, u32 ndim, u64 dims[], T payload)
//   adam   u8 flag; if set: i64 t, then m and v tensors in the same order
namespace ckpt_detail {
constexpr char kMagic[8] = {'V', 'L', 'C', 'K', 'P', 'T', '0', '1'};

template <class T>
void write_named(std::ofstream& f, const std::string& name, const Tensor<T>& t) {
  u32 nlen = u32(name.size());
  f.write(reinterpret_cast<const char*>(&nlen), 4);
  f.write(name.data(), nlen);
  u32 ndim = u32(t.ndim());
  f.write(reinterpret_cast<const char*>(&ndim), 4);
  for (i64 d : t.shape()) {
    u64 v = u64(d);
    f.write(reinterpret_cast<const char*>(&v), 8);
  }
  f.write(reinterpret_cast<const char*>(t.data()), std::streamsize(size_t(t.numel()) * sizeof(T)));
}

template <class T>
std::pair<std::string, Tensor<T>> read_named(std::ifstream& f) {
  u32 nlen = 0;
  f.read(reinterpret_cast<char*>(&nlen), 4);
  VEILA_CHECK(f.good() && nlen < 4096, "corrupt checkpoint tensor name");
  std::string name(nlen, '\0');
  f.read(name.data(), nlen);
  u32 ndim = 0;
  f.read(reinterpret_cast<char*>(&ndim), 4);
  VEILA_CHECK(f.good() && ndim <= 8, "corrupt checkpoint tensor rank");
  std::vector<i64> shape;
  for (u32 i = 0; i < ndim; ++i) {
    u64 d = 0;
    f.read(reinterpret_cast<char*>(&d), 8);
    shape.push_back(i64(d));
  }
  Tensor<T> t(shape);
  f.read(reinterpret_cast<char*>(t.data()), std::streamsize(size_t(t.numel()) * sizeof(T)));
  VEILA_CHECK(f.good(), "truncated checkpoint tensor");
  return {name, std::move(t)};
}
}  // namespace ckpt_detail

template <class T>
void save_checkpoint(const std::string& path, const nlohmann::json& header,
                     const ParamStore<T>& store, const Adam<T>* adam) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write " + path);
  f.write(ckpt_detail::kMagic, 8);
  nlohmann::json h = header;
  h["dtype"] = std::is_same_v<T, float> ? "f32" : "f64";
  std::string js = h.dump();
  u64 jlen = js.size();
  f.write(reinterpret_cast<const char*>(&jlen), 8);
  f.write(js.data(), std::streamsize(js.size()));
  u32 n = u32(store.params.size());
  f.write(reinterpret_cast<const char*>(&n), 4);
  for (const auto& [name, p] : store.params) ckpt_detail::write_named(f, name, p->val);
  u8 has_adam = adam ? 1 : 0;
  f.write(reinterpret_cast<const char*>(&has_adam), 1);
  if (adam) {
    i64 t = adam->t;
    f.write(reinterpret_cast<const char*>(&t), 8);
    for (const auto& [name, p] : store.params) {
      auto it = adam->m.find(name);
      Tensor<T> zero;
      const Tensor<T>& m = it != adam->m.end() ? it->second : (zero = Tensor<T>::zeros(p->val.shape()));
      ckpt_detail::write_named(f, name, m);
    }
    for (const auto& [name, p] : store.params) {
      auto it = adam->v.find(name);
      Tensor<T> zero;
      const Tensor<T>& v = it != adam->v.end() ? it->second : (zero = Tensor<T>::zeros(p->val.shape()));
      ckpt_detail::write_named(f, name, v);
    }
  }
  VEILA_CHECK(f.good(), "short write: " + path);
}

template <class T>
struct LoadedCheckpoint {
  nlohmann::json header;
  std::map<std::string, Tensor<T>> params;
  bool has_adam = false;
  i64 adam_t = 0;
  std::map<std::string, Tensor<T>> adam_m, adam_v;
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VEILA_CHECK(f.good(), "cannot open checkpoint " + path);
  char magic[8];
  f.read(magic, 8);
  VEILA_CHECK(f.good() && std::memcmp(magic, ckpt_detail::kMagic, 8) == 0,
              "bad checkpoint magic in " + path);
  u64 jlen = 0;
  f.read(reinterpret_cast<char*>(&jlen), 8);
  VEILA_CHECK(f.good() && jlen < (1ull << 30), "corrupt checkpoint header");
  std::string js(jlen, '\0');
  f.read(js.data(), std::streamsize(jlen));
  LoadedCheckpoint<T> out;
  out.header = nlohmann::json::parse(js);
  std::string dtype = out.header.value("dtype", "f32");
  VEILA_CHECK(dtype == (std::is_same_v<T, float> ? "f32" : "f64"),
              "checkpoint dtype " + dtype + " does not match requested precision");
  u32 n = 0;
  f.read(reinterpret_cast<char*>(&n), 4);
  for (u32 i = 0; i < n; ++i) {
    auto [name, t] = ckpt_detail::read_named<T>(f);
    out.params.emplace(std::move(name), std::move(t));
  }
  u8 has_adam = 0;
  f.read(reinterpret_cast<char*>(&has_adam), 1);
  if (f.good() && has_adam) {
    out.has_adam = true;
    f.read(reinterpret_cast<char*>(&out.adam_t), 8);
    for (u32 i = 0; i < n; ++i) {
      auto [name, t] = ckpt_detail::read_named<T>(f);
      out.adam_m.emplace(std::move(name), std::move(t));
    }
    for (u32 i = 0; i < n; ++i) {
      auto [name, t] = ckpt_detail::read_named<T>(f);
      out.adam_v.emplace(std::move(name), std::move(t));
    }
  }
  return out;
}

// Copy loaded tensors into an existing store (shapes must line up).
template <class T>
void restore_params(ParamStore<T>& store, const std::map<std::string, Tensor<T>>& loaded) {
  VEILA_CHECK(loaded.size() == store.params.size(),
              "checkpoint parameter count mismatch: file has " +
                  std::to_string(loaded.size()) + ", model has " +
                  std::to_string(store.params.size()));
  for (auto& [name, p] : store.params) {
    auto it = loaded.find(name);
    VEILA_CHECK(it != loaded.end(), "checkpoint missing parameter " + name);
    VEILA_CHECK(it->second.shape() == p->val.shape(), "shape mismatch for " + name);
    std::copy(it->second.begin(), it->second.end(), p->val.begin());
  }
}

}  // namespace veila::model
