#pragma once

#include <array>

#include "veila/ad/kernels.hpp"
#include "veila/geom/rangeview.hpp"
#include "veila/model/params.hpp"

namespace veila::model {

// 4-scale conditioning features from one view: level i has spatial size
// (H, W) / 2^(i+1) and a per-level channel width.
template <class T>
struct FeaturePyramid {
  std::array<Tensor<T>, 4> levels;  // each [1, D_i, H_i, W_i]
  std::string view;

  i64 width(int i) const { return levels[size_t(i)].dim(1); }
};

struct EncoderConfig {
  std::array<int, 4> widths{32, 64, 96, 128};
  u64 seed = 101;
};

// Encoder slot: the built-in desk-scale encoder is a frozen seeded CNN, but
// anything producing a shape-conforming pyramid (e.g. an adapter over a real
// pretrained backbone) can stand in.
template <class T>
class PyramidEncoder {
 public:
  virtual ~PyramidEncoder() = default;
  virtual FeaturePyramid<T> encode(const CameraView& view) const = 0;
  virtual std::array<int, 4> widths() const = 0;
};

// Frozen convolutional pyramid: weights are fixed at seeded initialization
// and no gradient ever reaches them. Two instances with different seeds play
// the roles of the semantic and depth encoders.
template <class T>
class FrozenEncoder final : public PyramidEncoder<T> {
 public:
  explicit FrozenEncoder(const EncoderConfig& cfg) : cfg_(cfg) {
    const int stem = std::max(cfg.widths[0] / 2, 8);
    layer_dims_ = {{{3, stem}, {stem, cfg.widths[0]}, {cfg.widths[0], cfg.widths[1]},
                    {cfg.widths[1], cfg.widths[2]}, {cfg.widths[2], cfg.widths[3]}}};
    for (size_t l = 0; l < layer_dims_.size(); ++l) {
      auto [ci, co] = layer_dims_[l];
      double std_dev = std::sqrt(2.0 / double(ci * 9));
      CounterRng r(cfg.seed, {0xe4c0deull, u64(l)});
      Tensor<T> w({co, ci, 3, 3});
      for (T& x : w) x = T(r.normal() * std_dev);
      Tensor<T> b({co});
      for (T& x : b) x = T(r.normal() * 0.05);
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  FeaturePyramid<T> encode(const CameraView& view) const override {
    const int H = view.height(), W = view.width();
    VEILA_CHECK(H >= 32 && W >= 32, "encoder needs at least a 32x32 image");
    Tensor<T> x({1, 3, H, W});
    for (i64 i = 0; i < x.numel(); ++i) x[i] = T(view.image[i]) - T(0.5);
    FeaturePyramid<T> pyr;
    pyr.view = view.name;
    std::vector<T> scratch;
    Tensor<T> y;
    for (size_t l = 0; l < weights_.size(); ++l) {
      ad::conv2d_forward(x, weights_[l], biases_[l], 2, false, y, scratch);
      for (i64 i = 0; i < y.numel(); ++i) {
        T s = T(1) / (T(1) + std::exp(-y[i]));
        y[i] = y[i] * s;
      }
      x = y;
      y = Tensor<T>{};
      if (l >= 1) pyr.levels[l - 1] = x;
    }
    return pyr;
  }

  std::array<int, 4> widths() const override { return cfg_.widths; }

  // Frozen-ness probe: content hash of every weight tensor.
  u64 weight_hash() const {
    u64 h = 0xcbf29ce484222325ull;
    for (const auto& w : weights_)
      h = fnv1a64(w.data(), size_t(w.numel()) * sizeof(T), h);
    for (const auto& b : biases_)
      h = fnv1a64(b.data(), size_t(b.numel()) * sizeof(T), h);
    return h;
  }

 private:
  EncoderConfig cfg_;
  std::array<std::pair<int, int>, 5> layer_dims_;
  std::vector<Tensor<T>> weights_;
  std::vector<Tensor<T>> biases_;
};

}  // namespace veila::model
