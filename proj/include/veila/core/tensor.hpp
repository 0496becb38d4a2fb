#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "veila/core/common.hpp"
#include "veila/core/rng.hpp"

namespace veila {

// Dense row-major tensor. Copies share storage; use clone() for a deep copy.
// Only whole-tensor reshapes are supported (no strided views).
template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<i64> shape)
      : shape_(std::move(shape)),
        store_(std::make_shared<std::vector<T>>(numel_of(shape_))) {}

  static Tensor zeros(std::vector<i64> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<i64> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.begin(), t.end(), value);
    return t;
  }

  static Tensor from(std::vector<i64> shape, std::vector<T> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    VEILA_CHECK(i64(values.size()) == numel_of(t.shape_), "value count mismatch");
    t.store_ = std::make_shared<std::vector<T>>(std::move(values));
    return t;
  }

  static Tensor randn(std::vector<i64> shape, u64 seed, u64 stream = 0, T scale = T(1)) {
    Tensor t(std::move(shape));
    CounterRng r(seed, stream);
    for (T& x : t) x = T(r.normal()) * scale;
    return t;
  }

  bool defined() const { return store_ != nullptr; }
  i64 numel() const { return defined() ? i64(store_->size()) : 0; }
  int ndim() const { return int(shape_.size()); }
  i64 dim(int i) const { return shape_[size_t(i)]; }
  const std::vector<i64>& shape() const { return shape_; }

  T* data() { return store_->data(); }
  const T* data() const { return store_->data(); }
  T* begin() { return data(); }
  T* end() { return data() + numel(); }
  const T* begin() const { return data(); }
  const T* end() const { return data() + numel(); }

  T& operator[](i64 i) { return (*store_)[size_t(i)]; }
  const T& operator[](i64 i) const { return (*store_)[size_t(i)]; }

  T& at(i64 i) { return (*this)[i]; }
  T& at(i64 i, i64 j) { return (*this)[i * shape_[1] + j]; }
  T& at(i64 i, i64 j, i64 k) { return (*this)[(i * shape_[1] + j) * shape_[2] + k]; }
  T& at(i64 i, i64 j, i64 k, i64 l) {
    return (*this)[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  const T& at(i64 i) const { return (*this)[i]; }
  const T& at(i64 i, i64 j) const { return (*this)[i * shape_[1] + j]; }
  const T& at(i64 i, i64 j, i64 k) const {
    return (*this)[(i * shape_[1] + j) * shape_[2] + k];
  }
  const T& at(i64 i, i64 j, i64 k, i64 l) const {
    return (*this)[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Shares storage.
  Tensor reshaped(std::vector<i64> shape) const {
    VEILA_CHECK(numel_of(shape) == numel(), "reshape changes element count");
    Tensor t;
    t.shape_ = std::move(shape);
    t.store_ = store_;
    return t;
  }

  Tensor clone() const {
    Tensor t;
    t.shape_ = shape_;
    t.store_ = std::make_shared<std::vector<T>>(*store_);
    return t;
  }

  template <class U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    for (i64 i = 0; i < numel(); ++i) t[i] = U((*this)[i]);
    return t;
  }

  void fill(T v) { std::fill(begin(), end(), v); }

  bool same_data(const Tensor& other) const { return store_ == other.store_; }

  static i64 numel_of(const std::vector<i64>& shape) {
    i64 n = 1;
    for (i64 d : shape) {
      VEILA_CHECK(d >= 0, "negative dimension");
      n *= d;
    }
    return n;
  }

 private:
  std::vector<i64> shape_;
  std::shared_ptr<std::vector<T>> store_;
};

template <class T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::equal(a.begin(), a.end(), b.begin());
}

template <class T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  VEILA_CHECK(a.numel() == b.numel(), "shape mismatch");
  T m = 0;
  for (i64 i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class T>
bool all_finite(const Tensor<T>& a) {
  for (i64 i = 0; i < a.numel(); ++i)
    if (!std::isfinite(double(a[i]))) return false;
  return true;
}

}  // namespace veila
