#pragma once

#include <map>
#include <string>

#include "veila/ad/graph.hpp"
#include "veila/core/hash.hpp"
#include "veila/core/rng.hpp"

namespace veila::model {

enum class Init { kZeros, kOnes, kHe, kXavier };

// Named trainable parameters. Initialization is keyed by (seed, name), so a
// parameter's initial value does not depend on creation order.
template <class T>
struct ParamStore {
  std::map<std::string, ad::Var<T>> params;
  u64 seed = 0;

  ad::Var<T> create(const std::string& name, std::vector<i64> shape, Init init) {
    VEILA_CHECK(!params.count(name), "duplicate parameter: " + name);
    Tensor<T> t(shape);
    if (init == Init::kOnes) t.fill(T(1));
    if (init == Init::kHe || init == Init::kXavier) {
      i64 fan_in = shape.size() >= 2 ? Tensor<T>::numel_of(shape) / shape[0] : shape[0];
      i64 fan_out = shape.size() >= 2 ? Tensor<T>::numel_of(shape) / (shape.size() > 1 ? shape[1] : 1) : shape[0];
      double std_dev = init == Init::kHe ? std::sqrt(2.0 / double(fan_in))
                                         : std::sqrt(2.0 / double(fan_in + fan_out));
      CounterRng r(seed, {0x9a4a11ull, fnv1a64(name)});
      for (T& x : t) x = T(r.normal() * std_dev);
    }
    auto v = ad::leaf(std::move(t));
    params[name] = v;
    return v;
  }

  ad::Var<T> get(const std::string& name) const {
    auto it = params.find(name);
    VEILA_CHECK(it != params.end(), "unknown parameter: " + name);
    return it->second;
  }

  void zero_grads() {
    for (auto& [name, p] : params)
      if (p->grad.defined()) p->grad.fill(T(0));
  }

  i64 count() const {
    i64 n = 0;
    for (const auto& [name, p] : params) n += p->val.numel();
    return n;
  }

  bool grads_finite() const {
    for (const auto& [name, p] : params)
      if (p->grad.defined() && !all_finite(p->grad)) return false;
    return true;
  }
};

template <class T>
struct Adam {
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  i64 t = 0;
  std::map<std::string, Tensor<T>> m, v;

  void step(ParamStore<T>& store, T lr) {
    ++t;
    const T bc1 = T(1) - std::pow(beta1, T(t));
    const T bc2 = T(1) - std::pow(beta2, T(t));
    for (auto& [name, p] : store.params) {
      auto mi = m.find(name);
      if (mi == m.end()) {
        m[name] = Tensor<T>::zeros(p->val.shape());
        v[name] = Tensor<T>::zeros(p->val.shape());
        mi = m.find(name);
      }
      Tensor<T>& mt = mi->second;
      Tensor<T>& vt = v[name];
      const bool has_grad = p->grad.defined();
      for (i64 i = 0; i < p->val.numel(); ++i) {
        T g = has_grad ? p->grad[i] : T(0);
        mt[i] = beta1 * mt[i] + (T(1) - beta1) * g;
        vt[i] = beta2 * vt[i] + (T(1) - beta2) * g * g;
        p->val[i] -= lr * (mt[i] / bc1) / (std::sqrt(vt[i] / bc2) + eps);
      }
    }
  }
};

}  // namespace veila::model
