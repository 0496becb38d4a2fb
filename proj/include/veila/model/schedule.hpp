#pragma once

#include <cmath>
#include <vector>

#include "veila/core/rng.hpp"
#include "veila/core/tensor.hpp"
#include "veila/geom/rangeview.hpp"

namespace veila::model {

// DDPM noise schedule. Betas must be nondecreasing in (0,1); alpha_bar is
// strictly decreasing with alpha_bar[T] < 0.01.
struct DiffusionSchedule {
  int steps = 1000;
  std::vector<double> beta;       // [T]
  std::vector<double> alpha_bar;  // [T]

  static DiffusionSchedule linear(int steps = 1000, double beta_min = 1e-4,
                                  double beta_max = 0.02) {
    DiffusionSchedule s;
    s.steps = steps;
    s.beta.resize(size_t(steps));
    s.alpha_bar.resize(size_t(steps));
    double prod = 1.0;
    for (int t = 0; t < steps; ++t) {
      s.beta[size_t(t)] =
          steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * t / double(steps - 1);
      prod *= 1.0 - s.beta[size_t(t)];
      s.alpha_bar[size_t(t)] = prod;
    }
    s.validate();
    return s;
  }

  void validate() const {
    VEILA_CHECK(steps >= 1 && i64(beta.size()) == steps, "schedule size mismatch");
    for (int t = 0; t < steps; ++t) {
      VEILA_CHECK(beta[size_t(t)] > 0.0 && beta[size_t(t)] < 1.0, "beta out of (0,1)");
      if (t) VEILA_CHECK(beta[size_t(t)] >= beta[size_t(t - 1)], "beta must be nondecreasing");
      if (t) VEILA_CHECK(alpha_bar[size_t(t)] < alpha_bar[size_t(t - 1)],
                         "alpha_bar must strictly decrease");
    }
    VEILA_CHECK(alpha_bar.back() < 0.01, "alpha_bar at T must be < 0.01");
  }

  // t is 1-based per the forward-process convention.
  double abar(int t) const {
    VEILA_CHECK(t >= 1 && t <= steps, "t out of range");
    return alpha_bar[size_t(t - 1)];
  }
};

// X_t = sqrt(abar_t) X0 + sqrt(1 - abar_t) eps
template <class T>
Tensor<T> forward_noise(const Tensor<T>& x0, int t, const Tensor<T>& eps,
                        const DiffusionSchedule& sched) {
  VEILA_CHECK(x0.shape() == eps.shape(), "noise shape mismatch");
  const T a = T(std::sqrt(sched.abar(t)));
  const T b = T(std::sqrt(1.0 - sched.abar(t)));
  Tensor<T> out(x0.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

// Maps range images to the [-1,1] diffusion state space. Depth goes through
// log(1+d)/log(1+d_max) to compress dynamic range; no-return pixels sit at
// exactly -1 (outside the valid band) and decode back to 0 below the
// threshold. Intensity maps linearly.
struct RangeNorm {
  double d_max = 40.0;
  double no_return_level = -1.0;
  double decode_threshold = -0.95;

  double encode_depth(double d) const {
    if (d <= 0.0) return no_return_level;
    return 2.0 * std::log1p(d) / std::log1p(d_max) - 1.0;
  }
  double decode_depth(double y, double d_min) const {
    if (y <= decode_threshold) return 0.0;
    double d = std::expm1((y + 1.0) * 0.5 * std::log1p(d_max));
    return std::clamp(d, d_min, d_max);
  }
  double encode_intensity(double i, bool valid) const {
    return valid ? 2.0 * std::clamp(i, 0.0, 1.0) - 1.0 : -1.0;
  }
  double decode_intensity(double y) const { return std::clamp((y + 1.0) * 0.5, 0.0, 1.0); }
};

// [2, h, w]: channel 0 depth, channel 1 intensity.
template <class T>
Tensor<T> normalize_range(const RangeImage& img, const RangeNorm& norm) {
  const i64 h = img.sensor.h, w = img.sensor.w;
  Tensor<T> out({2, h, w});
  for (i64 i = 0; i < h * w; ++i) {
    double d = double(img.depth[size_t(i)]);
    out[i] = T(norm.encode_depth(d));
    out[h * w + i] = T(norm.encode_intensity(double(img.intensity[size_t(i)]), d > 0.0));
  }
  return out;
}

template <class T>
RangeImage denormalize_range(const Tensor<T>& x, const SensorSpec& sensor,
                             const RangeNorm& norm) {
  VEILA_CHECK(x.ndim() == 3 && x.dim(0) == 2 && x.dim(1) == sensor.h && x.dim(2) == sensor.w,
              "normalized tensor shape mismatch");
  RangeImage img(sensor);
  const i64 hw = i64(sensor.h) * sensor.w;
  for (i64 i = 0; i < hw; ++i) {
    double d = norm.decode_depth(double(x[i]), sensor.d_min);
    img.depth[size_t(i)] = float(d);
    img.intensity[size_t(i)] = d > 0.0 ? float(norm.decode_intensity(double(x[hw + i]))) : 0.0f;
  }
  return img;
}

}  // namespace veila::model
