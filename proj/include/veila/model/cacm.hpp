#pragma once

#include "veila/ad/ops.hpp"
#include "veila/model/encoders.hpp"

namespace veila::model {

struct CacmConfig {
  std::array<int, 4> shared_widths{24, 32, 48, 64};
  double delta = 1e-6;
};

// Normalized confidence fusion: F = (c_s*Fs + c_d*Fd) / (c_s + c_d + delta),
// single-channel confidences broadcast over feature channels. delta = 0 is
// legal (confidences are sigmoid outputs, so the denominator stays positive)
// and makes the op an exact elementwise convex combination.
template <class T>
ad::Var<T> fuse(const ad::Var<T>& shared_s, const ad::Var<T>& shared_d,
                const ad::Var<T>& conf_s, const ad::Var<T>& conf_d, T delta) {
  VEILA_CHECK(delta >= T(0), "fuse: delta must be nonnegative");
  VEILA_CHECK(shared_s->val.shape() == shared_d->val.shape(), "fuse: feature shape mismatch");
  VEILA_CHECK(conf_s->val.shape() == conf_d->val.shape() && conf_s->val.dim(1) == 1,
              "fuse: confidence shape mismatch");
  auto num = ad::add(ad::mul_bcast_c1(shared_s, conf_s), ad::mul_bcast_c1(shared_d, conf_d));
  auto den = ad::add_scalar(ad::add(conf_s, conf_d), delta);
  return ad::mul_bcast_c1(num, ad::recip(den));
}

// Per-level projection of both pyramids into a shared latent space plus
// learned local confidences, then the normalized fusion.
template <class T>
class Cacm {
 public:
  struct LevelOut {
    ad::Var<T> shared_s, shared_d;  // [1, D_i, H_i, W_i]
    ad::Var<T> conf_s, conf_d;      // [1, 1, H_i, W_i], in (0,1)
    ad::Var<T> fused;               // [1, D_i, H_i, W_i]
  };

  Cacm(ParamStore<T>& store, const CacmConfig& cfg, const std::array<int, 4>& widths_s,
       const std::array<int, 4>& widths_d)
      : cfg_(cfg) {
    for (int i = 0; i < 4; ++i) {
      const std::string p = "cacm.l" + std::to_string(i) + ".";
      int ds = widths_s[size_t(i)], dd = widths_d[size_t(i)], dm = cfg.shared_widths[size_t(i)];
      proj_s_w_[i] = store.create(p + "proj_s.w", {dm, ds, 1, 1}, Init::kXavier);
      proj_s_b_[i] = store.create(p + "proj_s.b", {dm}, Init::kZeros);
      proj_d_w_[i] = store.create(p + "proj_d.w", {dm, dd, 1, 1}, Init::kXavier);
      proj_d_b_[i] = store.create(p + "proj_d.b", {dm}, Init::kZeros);
      conf_s_w_[i] = store.create(p + "conf_s.w", {1, dm, 3, 3}, Init::kXavier);
      conf_s_b_[i] = store.create(p + "conf_s.b", {1}, Init::kZeros);
      conf_d_w_[i] = store.create(p + "conf_d.w", {1, dm, 3, 3}, Init::kXavier);
      conf_d_b_[i] = store.create(p + "conf_d.b", {1}, Init::kZeros);
    }
  }

  // Depth features are first bilinearly matched to the semantic level's grid
  // (identity when the grids already agree), then both sides pass through
  // their own linear 1x1 projection.
  std::pair<ad::Var<T>, ad::Var<T>> project_to_shared(int level, const ad::Var<T>& f_s,
                                                      const ad::Var<T>& f_d) const {
    VEILA_CHECK(level >= 0 && level < 4, "bad level");
    auto d_in = f_d;
    if (f_d->val.dim(2) != f_s->val.dim(2) || f_d->val.dim(3) != f_s->val.dim(3))
      d_in = ad::bilinear_resize(f_d, f_s->val.dim(2), f_s->val.dim(3));
    auto s = ad::conv2d(f_s, proj_s_w_[level], proj_s_b_[level], 1, false);
    auto d = ad::conv2d(d_in, proj_d_w_[level], proj_d_b_[level], 1, false);
    return {s, d};
  }

  std::pair<ad::Var<T>, ad::Var<T>> estimate_confidence(int level, const ad::Var<T>& shared_s,
                                                        const ad::Var<T>& shared_d) const {
    auto cs = ad::sigmoid(ad::conv2d(shared_s, conf_s_w_[level], conf_s_b_[level], 1, false));
    auto cd = ad::sigmoid(ad::conv2d(shared_d, conf_d_w_[level], conf_d_b_[level], 1, false));
    return {cs, cd};
  }

  LevelOut forward_level(int level, const ad::Var<T>& f_s, const ad::Var<T>& f_d) const {
    LevelOut out;
    std::tie(out.shared_s, out.shared_d) = project_to_shared(level, f_s, f_d);
    std::tie(out.conf_s, out.conf_d) = estimate_confidence(level, out.shared_s, out.shared_d);
    out.fused = fuse(out.shared_s, out.shared_d, out.conf_s, out.conf_d, T(cfg_.delta));
    return out;
  }

  // Full conditioning pyramid for one view.
  std::array<ad::Var<T>, 4> forward(const FeaturePyramid<T>& sem,
                                    const FeaturePyramid<T>& dep) const {
    std::array<ad::Var<T>, 4> fused;
    for (int i = 0; i < 4; ++i) {
      auto fs = ad::constant(sem.levels[size_t(i)]);
      auto fd = ad::constant(dep.levels[size_t(i)]);
      fused[size_t(i)] = forward_level(i, fs, fd).fused;
    }
    return fused;
  }

  const CacmConfig& config() const { return cfg_; }

 private:
  CacmConfig cfg_;
  std::array<ad::Var<T>, 4> proj_s_w_, proj_s_b_, proj_d_w_, proj_d_b_;
  std::array<ad::Var<T>, 4> conf_s_w_, conf_s_b_, conf_d_w_, conf_d_b_;
};

}  // namespace veila::model
