#pragma once

#include "veila/ad/attention.hpp"
#include "veila/model/params.hpp"

namespace veila::model {

struct AlignmentParams {
  double tau = 20.0;     // meters, depth decay
  int k_samples = 16;    // depth bins per ray per view
  int fourier_bands = 4; // L
  int heads = 4;
  int head_dim = 8;

  int attn_dim() const { return heads * head_dim; }
  void validate() const {
    VEILA_CHECK(tau > 0.0, "tau must be positive");
    VEILA_CHECK(k_samples >= 1 && fourier_bands >= 1, "K and L must be >= 1");
    VEILA_CHECK(heads >= 1 && head_dim >= 1, "bad attention dims");
  }
};

// Log-uniform depth bin centers over [d_min, d_max]; K=1 degenerates to the
// geometric mean. Shared across pixels.
inline std::vector<double> ray_depths(const SensorSpec& sensor, int k_samples) {
  std::vector<double> d(size_t(k_samples), 0.0);
  const double lo = std::log(sensor.d_min), hi = std::log(sensor.d_max);
  for (int k = 0; k < k_samples; ++k)
    d[size_t(k)] = std::exp(lo + (hi - lo) * (k + 0.5) / k_samples);
  return d;
}

// Per-pixel epipolar samples against one conditioning view: candidate 3D
// points d_k * Ray(u,v), their camera projections and validity masks.
struct RaySamples {
  std::vector<double> depths;
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector2d> proj;  // full-resolution pixel coords
  std::vector<u8> mask;
};

inline RaySamples sample_ray(int u, int v, const SensorSpec& sensor,
                             const AlignmentParams& params, const CameraView& view) {
  params.validate();
  RaySamples s;
  s.depths = ray_depths(sensor, params.k_samples);
  Eigen::Vector3d ray = ray_direction(u, v, sensor);
  for (double d : s.depths) {
    Eigen::Vector3d p = d * ray;
    CamProjection c = project_to_camera(p, view);
    s.points.push_back(p);
    s.proj.emplace_back(c.u, c.v);
    s.mask.push_back(c.valid ? 1 : 0);
  }
  return s;
}

// Fourier features of a 3D point (coordinates pre-normalized to [-1,1]):
// the inputs prepended, then per coordinate (sin 2^l pi x, cos 2^l pi x)
// for l = 0..L-1.
inline std::vector<double> fourier_encode(const Eigen::Vector3d& p, int bands) {
  VEILA_CHECK(bands >= 1, "need at least one band");
  VEILA_CHECK(p.allFinite(), "non-finite point");
  std::vector<double> out;
  out.reserve(3 + size_t(6 * bands));
  for (int c = 0; c < 3; ++c) out.push_back(p[c]);
  for (int c = 0; c < 3; ++c)
    for (int l = 0; l < bands; ++l) {
      double arg = std::ldexp(kPi * p[c], l);  // 2^l * pi * x
      out.push_back(std::sin(arg));
      out.push_back(std::cos(arg));
    }
  return out;
}

inline int fourier_dim(int bands) { return 3 + 6 * bands; }

// Precomputed alignment geometry for one UNet scale: everything that depends
// only on (sensor, rig, calibration, params), shared by every forward pass.
template <class T>
struct GcmaScaleGeometry {
  int level = 0;     // 0-indexed UNet scale == conditioning level
  i64 pixels = 0;    // P at this scale
  i64 k_total = 0;   // samples per pixel across all views
  Tensor<T> gamma;   // [P, fourier_dim] query positional features
  Tensor<u8> mask;   // [P, k_total]
  Tensor<u8> row_valid;              // [P]; 0 marks "unconditioned" pixels
  std::vector<Tensor<T>> pts;        // per view: [P*K, 2] conditioning-level coords
  Tensor<T> w_unit;                  // [P, k_total] depth priors, unit mean over valid
  Tensor<T> w_aggregate;             // [P, k_total] Eq-style normalized weights (sum 1)
};

// Map a full-resolution camera pixel coordinate onto conditioning level l
// (stride 2^(l+2)) under the half-pixel convention.
inline double to_level_coord(double full, int level) {
  const double s = double(1 << (level + 2));
  return (full + 0.5) / s - 0.5;
}

template <class T>
GcmaScaleGeometry<T> make_gcma_geometry(const SensorSpec& sensor_full, int level,
                                        const std::vector<CameraView>& views,
                                        const AlignmentParams& params) {
  params.validate();
  SensorSpec s = sensor_full.at_scale(level);
  s.validate();
  const int K = params.k_samples;
  const i64 P = i64(s.h) * i64(s.w);
  const i64 n_views = i64(views.size());
  const i64 k_total = n_views * K;

  GcmaScaleGeometry<T> g;
  g.level = level;
  g.pixels = P;
  g.k_total = k_total;
  g.gamma = Tensor<T>({P, i64(fourier_dim(params.fourier_bands))});
  g.mask = Tensor<u8>::zeros({P, k_total});
  g.row_valid = Tensor<u8>::zeros({P});
  g.w_unit = Tensor<T>::zeros({P, k_total});
  g.w_aggregate = Tensor<T>::zeros({P, k_total});
  for (i64 vi = 0; vi < n_views; ++vi) g.pts.push_back(Tensor<T>::zeros({P * K, 2}));

  const auto depths = ray_depths(s, K);
  std::vector<double> w_raw(size_t(k_total), 0.0);
  for (int v = 0; v < s.h; ++v)
    for (int u = 0; u < s.w; ++u) {
      const i64 p = i64(v) * s.w + u;
      // query positional features: unit-depth ray point, normalized by d_max
      // like every other coordinate entering the Fourier encoding
      Eigen::Vector3d ray = ray_direction(u, v, s);
      auto gam = fourier_encode(ray / s.d_max, params.fourier_bands);
      for (size_t j = 0; j < gam.size(); ++j) g.gamma.at(p, i64(j)) = T(gam[j]);

      double w_sum = 0;
      i64 n_valid = 0;
      for (i64 vi = 0; vi < n_views; ++vi) {
        for (int k = 0; k < K; ++k) {
          const i64 kk = vi * K + k;
          Eigen::Vector3d pt = depths[size_t(k)] * ray;
          CamProjection c = project_to_camera(pt, views[size_t(vi)]);
          g.pts[size_t(vi)].at(p * K + k, 0) = T(to_level_coord(c.u, level));
          g.pts[size_t(vi)].at(p * K + k, 1) = T(to_level_coord(c.v, level));
          if (!c.valid) {
            w_raw[size_t(kk)] = 0;
            continue;
          }
          g.mask.at(p, kk) = 1;
          double w = std::exp(-depths[size_t(k)] / params.tau);
          w_raw[size_t(kk)] = w;
          w_sum += w;
          ++n_valid;
        }
      }
      if (n_valid == 0) continue;
      g.row_valid[p] = 1;
      for (i64 kk = 0; kk < k_total; ++kk) {
        g.w_aggregate.at(p, kk) = T(w_raw[size_t(kk)] / w_sum);
        g.w_unit.at(p, kk) = T(w_raw[size_t(kk)] * double(n_valid) / w_sum);
      }
    }
  return g;
}

// Eq-8 style depth-aware aggregation as a differentiable composition:
// V_p = sum_k w_pk * F(proj_pk) with w normalized to sum 1 over valid k.
// Fully occluded pixels produce a zero row (their weights are all zero).
template <class T>
ad::Var<T> aggregate_values(const ad::Var<T>& fmap, const Tensor<T>& pts,
                            const Tensor<T>& weights) {
  const i64 P = weights.dim(0), K = weights.dim(1);
  auto gathered = ad::bilinear_gather(fmap, pts.clone());
  auto per_sample = ad::reshape(gathered, {P, K, fmap->val.dim(0)});
  return ad::sum_axis1(ad::scale_rows(per_sample, weights.clone()));
}

// One GCMA injection point. The key/value set per pixel is the per-depth-
// sample conditioning features weighted by unit-mean depth priors; keys are
// the values; the zero-initialized 1x1 output conv makes the block an exact
// identity at initialization.
template <class T>
class GcmaBlock {
 public:
  GcmaBlock(ParamStore<T>& store, const std::string& prefix, int range_width,
            int cond_width, const AlignmentParams& params)
      : params_(params), range_width_(range_width) {
    const int ca = params.attn_dim();
    const int gd = fourier_dim(params.fourier_bands);
    mlp1_w_ = store.create(prefix + ".mlp1.w", {range_width, gd}, Init::kHe);
    mlp1_b_ = store.create(prefix + ".mlp1.b", {range_width}, Init::kZeros);
    mlp2_w_ = store.create(prefix + ".mlp2.w", {range_width, range_width}, Init::kZeros);
    mlp2_b_ = store.create(prefix + ".mlp2.b", {range_width}, Init::kZeros);
    q_w_ = store.create(prefix + ".q.w", {ca, range_width}, Init::kXavier);
    q_b_ = store.create(prefix + ".q.b", {ca}, Init::kZeros);
    v_w_ = store.create(prefix + ".v.w", {ca, cond_width, 1, 1}, Init::kXavier);
    v_b_ = store.create(prefix + ".v.b", {ca}, Init::kZeros);
    zero_w_ = store.create(prefix + ".zero.w", {range_width, ca, 1, 1}, Init::kZeros);
    zero_b_ = store.create(prefix + ".zero.b", {range_width}, Init::kZeros);
  }

  // Q = R_t(u,v) + MLP(gamma(r)): the MLP's last layer starts at zero, so the
  // query equals the range feature at initialization.
  ad::Var<T> build_query(const ad::Var<T>& tokens, const GcmaScaleGeometry<T>& geom) const {
    auto g = ad::constant(geom.gamma.clone());
    auto hidden = ad::silu(ad::linear(g, mlp1_w_, mlp1_b_));
    auto pos = ad::linear(hidden, mlp2_w_, mlp2_b_);  // [P, C_r]
    return ad::add_bcast_batch(tokens, pos);
  }

  // Per-item value set [P, k_total, C_a] from the view-wise conditioning
  // features. The value projection runs on the feature map (projection and
  // bilinear sampling commute), then samples are gathered and depth-weighted.
  ad::Var<T> build_values(const std::vector<ad::Var<T>>& cond_views,
                          const GcmaScaleGeometry<T>& geom) const {
    VEILA_CHECK(cond_views.size() == geom.pts.size(), "view count mismatch");
    const int K = params_.k_samples;
    const i64 ca = params_.attn_dim();
    std::vector<ad::Var<T>> parts;
    for (size_t vi = 0; vi < cond_views.size(); ++vi) {
      auto vmap = ad::conv2d(cond_views[vi], v_w_, v_b_, 1, false);  // [1,C_a,Hc,Wc]
      auto flat = ad::reshape(vmap, {vmap->val.dim(1), vmap->val.dim(2), vmap->val.dim(3)});
      auto gathered = ad::bilinear_gather(flat, geom.pts[vi].clone());  // [P*K, C_a]
      auto shaped = ad::reshape(gathered, {geom.pixels, i64(K), ca});
      // slice this view's columns of the unit-mean weight table
      Tensor<T> w_view({geom.pixels, i64(K)});
      for (i64 p = 0; p < geom.pixels; ++p)
        for (i64 k = 0; k < K; ++k) w_view.at(p, k) = geom.w_unit.at(p, i64(vi) * K + k);
      parts.push_back(ad::scale_rows(shaped, std::move(w_view)));
    }
    return parts.size() == 1 ? parts[0] : ad::concat(parts, 1);
  }

  // h [B, C_r, hi, wi] -> h + ZeroConv(CrossAttn(build_query(h), values)).
  // `cond` indexes [item][view]. Fully occluded pixels attend to nothing and
  // inject exactly zero (they stay unconditioned; coherence is PFC's job).
  ad::Var<T> forward(const ad::Var<T>& h,
                     const std::vector<std::vector<ad::Var<T>>>& cond,
                     const GcmaScaleGeometry<T>& geom) const {
    const i64 B = h->val.dim(0), hi = h->val.dim(2), wi = h->val.dim(3);
    VEILA_CHECK(i64(cond.size()) == B, "conditioning batch mismatch");
    VEILA_CHECK(hi * wi == geom.pixels, "geometry grid mismatch");
    auto tokens = ad::to_tokens(h);  // [B, P, C_r]
    auto q_tok = build_query(tokens, geom);
    auto q_flat = ad::reshape(q_tok, {B * geom.pixels, i64(range_width_)});
    auto q_attn = ad::reshape(ad::linear(q_flat, q_w_, q_b_),
                              {B, geom.pixels, i64(params_.attn_dim())});
    std::vector<ad::Var<T>> vals;
    for (i64 b = 0; b < B; ++b) vals.push_back(build_values(cond[size_t(b)], geom));
    auto v = ad::stack0(vals);  // [B, P, k_total, C_a]
    auto attn = ad::perpixel_attention(q_attn, v, geom.mask.clone(), params_.heads);
    auto spatial = ad::from_tokens(attn, hi, wi);  // [B, C_a, hi, wi]
    return ad::add(h, ad::conv2d(spatial, zero_w_, zero_b_, 1, false));
  }

  const AlignmentParams& params() const { return params_; }

 private:
  AlignmentParams params_;
  int range_width_;
  ad::Var<T> mlp1_w_, mlp1_b_, mlp2_w_, mlp2_b_;
  ad::Var<T> q_w_, q_b_, v_w_, v_b_, zero_w_, zero_b_;
};

}  // namespace veila::model
