#pragma once

#include "veila/core/gemm.hpp"
#include "veila/core/tensor.hpp"

namespace veila::ad {

// Plain (tape-free) conv kernels, shared by the autodiff op and the frozen
// encoders. Row padding is zero-fill; column padding is circular when `circ`
// is set (the panoramic wrap) and zero otherwise.

struct ConvGeom {
  i64 b, ci, h, w, co, kh, kw, stride, ph, pw, ho, wo;
};

template <class T>
ConvGeom conv_geom(const Tensor<T>& x, const Tensor<T>& w, i64 stride) {
  VEILA_CHECK(x.ndim() == 4 && w.ndim() == 4, "conv wants 4-d tensors");
  VEILA_CHECK(x.dim(1) == w.dim(1), "conv channel mismatch");
  ConvGeom g;
  g.b = x.dim(0);
  g.ci = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.co = w.dim(0);
  g.kh = w.dim(2);
  g.kw = w.dim(3);
  g.stride = stride;
  g.ph = g.kh / 2;
  g.pw = g.kw / 2;
  g.ho = (g.h + 2 * g.ph - g.kh) / stride + 1;
  g.wo = (g.w + 2 * g.pw - g.kw) / stride + 1;
  return g;
}

template <class T>
void im2col(const T* x, const ConvGeom& g, bool circ, T* cols) {
  // cols [ci*kh*kw, ho*wo]
  const i64 plane = g.h * g.w;
  i64 row = 0;
  for (i64 ci = 0; ci < g.ci; ++ci)
    for (i64 ky = 0; ky < g.kh; ++ky)
      for (i64 kx = 0; kx < g.kw; ++kx, ++row) {
        T* dst = cols + row * g.ho * g.wo;
        for (i64 oy = 0; oy < g.ho; ++oy) {
          i64 iy = oy * g.stride - g.ph + ky;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            dst += g.wo;
            continue;
          }
          const T* src = x + ci * plane + iy * g.w;
          for (i64 ox = 0; ox < g.wo; ++ox) {
            i64 ix = ox * g.stride - g.pw + kx;
            if (circ) {
              ix = (ix % g.w + g.w) % g.w;
              *dst++ = src[ix];
            } else {
              *dst++ = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
            }
          }
        }
      }
}

template <class T>
void col2im_add(const T* cols, const ConvGeom& g, bool circ, T* dx) {
  const i64 plane = g.h * g.w;
  i64 row = 0;
  for (i64 ci = 0; ci < g.ci; ++ci)
    for (i64 ky = 0; ky < g.kh; ++ky)
      for (i64 kx = 0; kx < g.kw; ++kx, ++row) {
        const T* src = cols + row * g.ho * g.wo;
        for (i64 oy = 0; oy < g.ho; ++oy) {
          i64 iy = oy * g.stride - g.ph + ky;
          if (iy < 0 || iy >= g.h) {
            src += g.wo;
            continue;
          }
          T* dst = dx + ci * plane + iy * g.w;
          for (i64 ox = 0; ox < g.wo; ++ox) {
            i64 ix = ox * g.stride - g.pw + kx;
            if (circ) ix = (ix % g.w + g.w) % g.w;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
          src += g.wo;
        }
      }
}

// y [b,co,ho,wo] = w * x (+ bias). `cols` is scratch of size ci*kh*kw*ho*wo.
template <class T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                    i64 stride, bool circ, Tensor<T>& y, std::vector<T>& cols) {
  ConvGeom g = conv_geom(x, w, stride);
  const i64 ckk = g.ci * g.kh * g.kw;
  const i64 owo = g.ho * g.wo;
  cols.resize(size_t(ckk * owo));
  if (!y.defined() || y.shape() != std::vector<i64>{g.b, g.co, g.ho, g.wo})
    y = Tensor<T>::zeros({g.b, g.co, g.ho, g.wo});
  for (i64 b = 0; b < g.b; ++b) {
    im2col(x.data() + b * g.ci * g.h * g.w, g, circ, cols.data());
    T* yb = y.data() + b * g.co * owo;
    gemm(false, false, g.co, owo, ckk, T(1), w.data(), ckk, cols.data(), owo, T(0), yb, owo);
    if (bias.defined())
      for (i64 co = 0; co < g.co; ++co) {
        T bv = bias[co];
        T* row_ptr = yb + co * owo;
        for (i64 i = 0; i < owo; ++i) row_ptr[i] += bv;
      }
  }
}

}  // namespace veila::ad
