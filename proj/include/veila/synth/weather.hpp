#pragma once

#include "veila/synth/render.hpp"

namespace veila::synth {

struct WeatherParams {
  double fog_beta = 0.02;         // 1/m, Beer-Lambert attenuation
  double fog_scatter_frac = 0.02; // fraction of dropped rays that scatter
  double fog_scatter_max = 15.0;  // m
  double snow_rate = 0.01;        // fraction of pixels replaced by flakes
  double snow_max = 8.0;          // m
};

// Fog: a return at depth d survives with probability exp(-beta*d), surviving
// intensities attenuate by the same factor; a small fraction of dropped rays
// come back as near-field scatter. Snow: random pixels become close clutter
// returns. Both operate per range pixel and are seed-deterministic; clean and
// night do not modify LiDAR and are rejected here.
inline RangeImage corrupt_lidar(const RangeImage& in, Weather weather,
                                const WeatherParams& params, u64 seed) {
  VEILA_CHECK(weather == Weather::kFog || weather == Weather::kSnow,
              "corrupt_lidar only handles fog and snow");
  RangeImage out = in;
  if (out.labels.empty())
    out.labels.assign(size_t(in.sensor.h) * size_t(in.sensor.w), -1);
  const double d_min = in.sensor.d_min;
  CounterRng r(seed, {0xc044u, u64(weather)});
  for (int v = 0; v < in.sensor.h; ++v)
    for (int u = 0; u < in.sensor.w; ++u) {
      i64 i = out.idx(v, u);
      if (weather == Weather::kFog) {
        double d = double(out.depth[size_t(i)]);
        if (d <= 0.0) continue;
        double survive = std::exp(-params.fog_beta * d);
        if (r.uniform() < survive) {
          out.intensity[size_t(i)] = float(out.intensity[size_t(i)] * survive);
        } else if (r.uniform() < params.fog_scatter_frac) {
          out.depth[size_t(i)] =
              float(r.uniform(d_min, std::min(params.fog_scatter_max, in.sensor.d_max)));
          out.intensity[size_t(i)] = float(0.05 + 0.15 * r.uniform());
          out.labels[size_t(i)] = kClutter;
        } else {
          out.depth[size_t(i)] = 0.0f;
          out.intensity[size_t(i)] = 0.0f;
          out.labels[size_t(i)] = -1;
        }
      } else {  // snow
        if (r.uniform() < params.snow_rate) {
          out.depth[size_t(i)] =
              float(r.uniform(d_min, std::min(params.snow_max, in.sensor.d_max)));
          out.intensity[size_t(i)] = float(0.5 + 0.4 * r.uniform());
          out.labels[size_t(i)] = kClutter;
        }
      }
    }
  return out;
}

}  // namespace veila::synth
