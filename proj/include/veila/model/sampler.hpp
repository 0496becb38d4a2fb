#pragma once

#include "veila/model/veila_model.hpp"

namespace veila::model {

template <class T>
struct SampledScene {
  Tensor<T> x0;  // normalized [2,h,w]
  RangeImage range;
  PointCloud cloud;
};

// Ancestral DDPM sampling over a strided subsequence of the schedule. Noise
// is keyed by (seed, chain, step), so a chain's output is byte-identical no
// matter how chains are batched. Conditioning is per chain; pass an empty
// pyramid list for unconditional models.
template <class T>
std::vector<SampledScene<T>> sample_chains(
    const VeilaModel<T>& model,
    const std::vector<std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>>>& conds,
    int n, u64 seed, int steps, int max_batch = 8) {
  VEILA_CHECK(steps >= 1 && steps <= model.sched.steps, "steps must be in [1, T]");
  const SensorSpec& sensor = model.cfg.sensor;
  const i64 h = sensor.h, w = sensor.w, chw = 2 * h * w;
  const bool conditional = model.conditional();
  if (conditional)
    VEILA_CHECK(i64(conds.size()) == n, "need one conditioning view set per chain");

  // strided timestep subsequence, descending, always ending at t = 1
  std::vector<int> taus;
  for (int i = 0; i < steps; ++i) {
    int t = 1 + int(std::llround(double(model.sched.steps - 1) * (steps == 1 ? 0.0 : double(i) / (steps - 1))));
    if (taus.empty() || taus.back() != t) taus.push_back(t);
  }
  std::reverse(taus.begin(), taus.end());  // T ... 1

  std::vector<SampledScene<T>> out(size_t(n));
  for (int base = 0; base < n; base += max_batch) {
    const int B = std::min(max_batch, n - base);
    Tensor<T> x({i64(B), 2, h, w});
    for (int b = 0; b < B; ++b) {
      CounterRng init(seed, {0x1417ull, u64(base + b)});
      for (i64 i = 0; i < chw; ++i) x[b * chw + i] = T(init.normal());
    }

    Conditioning<T> cond;
    if (conditional) {
      std::vector<const std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>>*> batch;
      for (int b = 0; b < B; ++b) batch.push_back(&conds[size_t(base + b)]);
      cond = model.condition(batch);
    }

    for (size_t si = 0; si < taus.size(); ++si) {
      const int t = taus[si];
      const double a_cur = model.sched.abar(t);
      const double a_prev = si + 1 < taus.size() ? model.sched.abar(taus[si + 1]) : 1.0;
      const double alpha_eff = a_cur / a_prev;
      const double beta_eff = 1.0 - alpha_eff;
      const double sigma =
          si + 1 < taus.size() ? std::sqrt((1.0 - a_prev) / (1.0 - a_cur) * beta_eff) : 0.0;
      const double c_x0 = std::sqrt(a_prev) * beta_eff / (1.0 - a_cur);
      const double c_xt = std::sqrt(alpha_eff) * (1.0 - a_prev) / (1.0 - a_cur);

      auto x_var = ad::constant(x.clone());
      std::vector<int> ts(size_t(B), t);
      auto eps_hat = model.predict_noise(x_var, ts, conditional ? &cond : nullptr);

      Tensor<T> next({i64(B), 2, h, w});
      const double inv_sqrt_a = 1.0 / std::sqrt(a_cur);
      const double noise_scale = std::sqrt(1.0 - a_cur);
      for (int b = 0; b < B; ++b) {
        CounterRng zr(seed, {0x5a10ull, u64(base + b), u64(si)});
        for (i64 i = 0; i < chw; ++i) {
          double xt = double(x[b * chw + i]);
          double x0_hat = inv_sqrt_a * (xt - noise_scale * double(eps_hat->val[b * chw + i]));
          x0_hat = std::clamp(x0_hat, -1.0, 1.0);
          double mean = c_x0 * x0_hat + c_xt * xt;
          next[b * chw + i] = T(mean + (sigma > 0 ? sigma * zr.normal() : 0.0));
        }
      }
      x = std::move(next);
    }

    for (int b = 0; b < B; ++b) {
      SampledScene<T>& s = out[size_t(base + b)];
      s.x0 = Tensor<T>({2, h, w});
      std::copy(x.begin() + b * chw, x.begin() + (b + 1) * chw, s.x0.begin());
      s.range = denormalize_range(s.x0, sensor, model.norm);
      s.cloud = unproject(s.range);
    }
  }
  return out;
}

}  // namespace veila::model
