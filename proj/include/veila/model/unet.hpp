#pragma once

#include "veila/model/cacm.hpp"
#include "veila/model/gcma.hpp"
#include "veila/model/schedule.hpp"

namespace veila::model {

struct DenoiserConfig {
  int base_width = 16;
  std::array<int, 4> mult{1, 2, 2, 4};
  int pfc_heads = 4;
  bool pfc = true;
  std::vector<int> gcma_scales{1, 2, 3, 4};  // 1-indexed; empty disables GCMA
  int time_dim = 64;
  int groups = 8;

  int width(int scale) const { return base_width * mult[size_t(scale)]; }
  bool gcma_at(int scale) const {  // 0-indexed scale
    for (int s : gcma_scales)
      if (s == scale + 1) return true;
    return false;
  }
};

inline i64 norm_groups(i64 channels, i64 preferred) {
  i64 g = std::min<i64>(preferred, channels);
  while (channels % g != 0) --g;
  return g;
}

// Sinusoidal timestep features, [B, dim].
template <class T>
Tensor<T> time_embedding(const std::vector<int>& t, int dim) {
  const i64 B = i64(t.size());
  const int half = dim / 2;
  Tensor<T> out({B, i64(dim)});
  for (i64 b = 0; b < B; ++b)
    for (int i = 0; i < half; ++i) {
      double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
      out.at(b, i) = T(std::sin(t[size_t(b)] * freq));
      out.at(b, half + i) = T(std::cos(t[size_t(b)] * freq));
    }
  return out;
}

// Pre-norm residual block with a per-channel timestep bias between the convs.
template <class T>
class ResBlock {
 public:
  ResBlock(ParamStore<T>& store, const std::string& prefix, int c_in, int c_out,
           int time_dim, int groups, bool circ)
      : c_in_(c_in), c_out_(c_out), circ_(circ) {
    g1_ = norm_groups(c_in, groups);
    g2_ = norm_groups(c_out, groups);
    gn1_g_ = store.create(prefix + ".gn1.g", {c_in}, Init::kOnes);
    gn1_b_ = store.create(prefix + ".gn1.b", {c_in}, Init::kZeros);
    conv1_w_ = store.create(prefix + ".conv1.w", {c_out, c_in, 3, 3}, Init::kHe);
    conv1_b_ = store.create(prefix + ".conv1.b", {c_out}, Init::kZeros);
    temb_w_ = store.create(prefix + ".temb.w", {c_out, time_dim}, Init::kXavier);
    temb_b_ = store.create(prefix + ".temb.b", {c_out}, Init::kZeros);
    gn2_g_ = store.create(prefix + ".gn2.g", {c_out}, Init::kOnes);
    gn2_b_ = store.create(prefix + ".gn2.b", {c_out}, Init::kZeros);
    conv2_w_ = store.create(prefix + ".conv2.w", {c_out, c_out, 3, 3}, Init::kHe);
    conv2_b_ = store.create(prefix + ".conv2.b", {c_out}, Init::kZeros);
    if (c_in != c_out) {
      skip_w_ = store.create(prefix + ".skip.w", {c_out, c_in, 1, 1}, Init::kXavier);
      skip_b_ = store.create(prefix + ".skip.b", {c_out}, Init::kZeros);
    }
  }

  ad::Var<T> forward(const ad::Var<T>& x, const ad::Var<T>& temb) const {
    auto h = ad::conv2d(ad::silu(ad::group_norm(x, gn1_g_, gn1_b_, g1_)), conv1_w_,
                        conv1_b_, 1, circ_);
    h = ad::add_bcast_hw(h, ad::linear(temb, temb_w_, temb_b_));
    h = ad::conv2d(ad::silu(ad::group_norm(h, gn2_g_, gn2_b_, g2_)), conv2_w_, conv2_b_, 1,
                   circ_);
    auto s = skip_w_ ? ad::conv2d(x, skip_w_, skip_b_, 1, false) : x;
    return ad::add(h, s);
  }

 private:
  int c_in_, c_out_;
  bool circ_;
  i64 g1_ = 1, g2_ = 1;
  ad::Var<T> gn1_g_, gn1_b_, conv1_w_, conv1_b_, temb_w_, temb_b_;
  ad::Var<T> gn2_g_, gn2_b_, conv2_w_, conv2_b_, skip_w_, skip_b_;
};

// Panoramic feature coherence: global self-attention over every bottleneck
// position with a zero-initialized output projection, so it is an exact
// identity at initialization.
template <class T>
class PfcBlock {
 public:
  PfcBlock(ParamStore<T>& store, const std::string& prefix, int channels, int heads)
      : channels_(channels), heads_(heads) {
    q_w_ = store.create(prefix + ".q.w", {channels, channels}, Init::kXavier);
    q_b_ = store.create(prefix + ".q.b", {channels}, Init::kZeros);
    k_w_ = store.create(prefix + ".k.w", {channels, channels}, Init::kXavier);
    k_b_ = store.create(prefix + ".k.b", {channels}, Init::kZeros);
    v_w_ = store.create(prefix + ".v.w", {channels, channels}, Init::kXavier);
    v_b_ = store.create(prefix + ".v.b", {channels}, Init::kZeros);
    out_w_ = store.create(prefix + ".out.w", {channels, channels}, Init::kZeros);
    out_b_ = store.create(prefix + ".out.b", {channels}, Init::kZeros);
  }

  ad::Var<T> forward(const ad::Var<T>& h) const {
    const i64 B = h->val.dim(0), H = h->val.dim(2), W = h->val.dim(3);
    const i64 N = H * W, C = channels_;
    auto tokens = ad::to_tokens(h);
    auto flat = ad::reshape(tokens, {B * N, C});
    auto q = ad::reshape(ad::linear(flat, q_w_, q_b_), {B, N, C});
    auto k = ad::reshape(ad::linear(flat, k_w_, k_b_), {B, N, C});
    auto v = ad::reshape(ad::linear(flat, v_w_, v_b_), {B, N, C});
    auto attn = ad::global_attention(q, k, v, heads_);
    auto out = ad::reshape(ad::linear(ad::reshape(attn, {B * N, C}), out_w_, out_b_),
                           {B, N, C});
    return ad::add(h, ad::from_tokens(out, H, W));
  }

 private:
  i64 channels_, heads_;
  ad::Var<T> q_w_, q_b_, k_w_, k_b_, v_w_, v_b_, out_w_, out_b_;
};

// Conditioning inputs for one forward pass: fused CACM pyramids per
// (item, view) plus the per-scale alignment geometry shared across items.
template <class T>
struct Conditioning {
  std::vector<std::vector<std::array<ad::Var<T>, 4>>> features;  // [item][view][level]
  const std::array<GcmaScaleGeometry<T>, 4>* geometry = nullptr;

  std::vector<std::vector<ad::Var<T>>> level(int l) const {
    std::vector<std::vector<ad::Var<T>>> out;
    for (const auto& item : features) {
      std::vector<ad::Var<T>> views;
      for (const auto& view : item) views.push_back(view[size_t(l)]);
      out.push_back(std::move(views));
    }
    return out;
  }
};

// Panoramic UNet noise predictor. Azimuth-circular convolutions throughout
// the range-image path, sinusoidal time features added per block, GCMA
// injection at the configured scales, PFC at the bottleneck.
template <class T>
class UNet {
 public:
  UNet(ParamStore<T>& store, const DenoiserConfig& cfg, const AlignmentParams& align,
       const std::array<int, 4>& cond_widths)
      : cfg_(cfg) {
    const int td = cfg.time_dim;
    time1_w_ = store.create("unet.time1.w", {td, td}, Init::kXavier);
    time1_b_ = store.create("unet.time1.b", {td}, Init::kZeros);
    time2_w_ = store.create("unet.time2.w", {td, td}, Init::kXavier);
    time2_b_ = store.create("unet.time2.b", {td}, Init::kZeros);
    stem_w_ = store.create("unet.stem.w", {cfg.width(0), 2, 3, 3}, Init::kHe);
    stem_b_ = store.create("unet.stem.b", {cfg.width(0)}, Init::kZeros);
    for (int l = 0; l < 4; ++l) {
      const std::string p = "unet.s" + std::to_string(l);
      int c_in = l == 0 ? cfg.width(0) : cfg.width(l - 1);
      down_[size_t(l)] = std::make_unique<ResBlock<T>>(store, p + ".res", c_in,
                                                       cfg.width(l), td, cfg.groups, true);
      if (cfg.gcma_at(l))
        gcma_[size_t(l)] = std::make_unique<GcmaBlock<T>>(
            store, p + ".gcma", cfg.width(l), cond_widths[size_t(l)], align);
      if (l < 3) {
        dsamp_w_[size_t(l)] = store.create(p + ".down.w",
                                           {cfg.width(l + 1), cfg.width(l), 3, 3}, Init::kHe);
        dsamp_b_[size_t(l)] = store.create(p + ".down.b", {cfg.width(l + 1)}, Init::kZeros);
      }
    }
    if (cfg.pfc)
      pfc_ = std::make_unique<PfcBlock<T>>(store, "unet.pfc", cfg.width(3), cfg.pfc_heads);
    mid_ = std::make_unique<ResBlock<T>>(store, "unet.mid.res", cfg.width(3), cfg.width(3),
                                         td, cfg.groups, true);
    for (int l = 2; l >= 0; --l) {
      const std::string p = "unet.u" + std::to_string(l);
      usamp_w_[size_t(l)] = store.create(p + ".up.w", {cfg.width(l), cfg.width(l + 1), 3, 3},
                                         Init::kHe);
      usamp_b_[size_t(l)] = store.create(p + ".up.b", {cfg.width(l)}, Init::kZeros);
      up_[size_t(l)] = std::make_unique<ResBlock<T>>(store, p + ".res", 2 * cfg.width(l),
                                                     cfg.width(l), td, cfg.groups, true);
    }
    head_g_ = store.create("unet.head.gn.g", {cfg.width(0)}, Init::kOnes);
    head_b_ = store.create("unet.head.gn.b", {cfg.width(0)}, Init::kZeros);
    head_w_ = store.create("unet.head.w", {2, cfg.width(0), 3, 3}, Init::kHe);
    head_bias_ = store.create("unet.head.b", {2}, Init::kZeros);
  }

  // x_t [B,2,h,w], one timestep per item; cond may be null (pure backbone).
  ad::Var<T> forward(const ad::Var<T>& x_t, const std::vector<int>& t,
                     const Conditioning<T>* cond) const {
    VEILA_CHECK(i64(t.size()) == x_t->val.dim(0), "timestep count mismatch");
    VEILA_CHECK(x_t->val.dim(2) % 8 == 0 && x_t->val.dim(3) % 8 == 0,
                "spatial dims must be divisible by 8");
    auto temb = ad::constant(time_embedding<T>(t, cfg_.time_dim));
    temb = ad::linear(ad::silu(ad::linear(temb, time1_w_, time1_b_)), time2_w_, time2_b_);

    auto h = ad::conv2d(x_t, stem_w_, stem_b_, 1, true);
    std::array<ad::Var<T>, 3> skips;
    for (int l = 0; l < 4; ++l) {
      h = down_[size_t(l)]->forward(h, temb);
      if (gcma_[size_t(l)]) {
        VEILA_CHECK(cond == nullptr || cond->geometry != nullptr,
                    "conditioning without geometry");
        if (cond)
          h = gcma_[size_t(l)]->forward(h, cond->level(l), (*cond->geometry)[size_t(l)]);
      }
      if (l < 3) {
        skips[size_t(l)] = h;
        h = ad::conv2d(h, dsamp_w_[size_t(l)], dsamp_b_[size_t(l)], 2, true);
      }
    }
    if (pfc_) h = pfc_->forward(h);
    h = mid_->forward(h, temb);
    for (int l = 2; l >= 0; --l) {
      h = ad::conv2d(ad::upsample2x(h), usamp_w_[size_t(l)], usamp_b_[size_t(l)], 1, true);
      h = ad::concat<T>({h, skips[size_t(l)]}, 1);
      h = up_[size_t(l)]->forward(h, temb);
    }
    auto g = norm_groups(cfg_.width(0), cfg_.groups);
    h = ad::silu(ad::group_norm(h, head_g_, head_b_, g));
    return ad::conv2d(h, head_w_, head_bias_, 1, true);
  }

  const DenoiserConfig& config() const { return cfg_; }

 private:
  DenoiserConfig cfg_;
  ad::Var<T> time1_w_, time1_b_, time2_w_, time2_b_;
  ad::Var<T> stem_w_, stem_b_;
  std::array<std::unique_ptr<ResBlock<T>>, 4> down_;
  std::array<std::unique_ptr<GcmaBlock<T>>, 4> gcma_;
  std::array<ad::Var<T>, 3> dsamp_w_, dsamp_b_;
  std::unique_ptr<PfcBlock<T>> pfc_;
  std::unique_ptr<ResBlock<T>> mid_;
  std::array<ad::Var<T>, 3> usamp_w_, usamp_b_;
  std::array<std::unique_ptr<ResBlock<T>>, 3> up_;
  ad::Var<T> head_g_, head_b_, head_w_, head_bias_;
};

}  // namespace veila::model
