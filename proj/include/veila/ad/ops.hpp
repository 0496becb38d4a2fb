#pragma once

#include <cmath>

#include "veila/ad/graph.hpp"
#include "veila/ad/kernels.hpp"

namespace veila::ad {

// ---------------------------------------------------------------- elementwise

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  VEILA_CHECK(a->val.shape() == b->val.shape(), "add shape mismatch");
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a->val[i] + b->val[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      auto& ga = a->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
    }
    if (b->requires_grad) {
      auto& gb = b->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) gb[i] += n.grad[i];
    }
  });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  VEILA_CHECK(a->val.shape() == b->val.shape(), "sub shape mismatch");
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a->val[i] - b->val[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      auto& ga = a->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
    }
    if (b->requires_grad) {
      auto& gb = b->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) gb[i] -= n.grad[i];
    }
  });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  VEILA_CHECK(a->val.shape() == b->val.shape(), "mul shape mismatch");
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a->val[i] * b->val[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    if (a->requires_grad) {
      auto& ga = a->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * b->val[i];
    }
    if (b->requires_grad) {
      auto& gb = b->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) gb[i] += n.grad[i] * a->val[i];
    }
  });
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a->val[i] * s;
  return make_op<T>(std::move(out), {a}, [a, s](Node<T>& n) {
    auto& ga = a->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] * s;
  });
}

template <class T>
Var<T> add_scalar(const Var<T>& a, T s) {
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = a->val[i] + s;
  return make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
    auto& ga = a->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i];
  });
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-a->val[i]));
  return make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
    auto& ga = a->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) {
      T y = n.val[i];
      ga[i] += n.grad[i] * y * (T(1) - y);
    }
  });
}

template <class T>
Var<T> silu(const Var<T>& a) {
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) {
    T s = T(1) / (T(1) + std::exp(-a->val[i]));
    out[i] = a->val[i] * s;
  }
  return make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
    auto& ga = a->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) {
      T x = a->val[i];
      T s = T(1) / (T(1) + std::exp(-x));
      ga[i] += n.grad[i] * (s + x * s * (T(1) - s));
    }
  });
}

template <class T>
Var<T> recip(const Var<T>& a) {
  Tensor<T> out(a->val.shape());
  for (i64 i = 0; i < out.numel(); ++i) out[i] = T(1) / a->val[i];
  return make_op<T>(std::move(out), {a}, [a](Node<T>& n) {
    auto& ga = a->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) {
      T y = n.val[i];
      ga[i] -= n.grad[i] * y * y;
    }
  });
}

// x [B,C,H,W] * m [B,1,H,W], confidence-style channel broadcast
template <class T>
Var<T> mul_bcast_c1(const Var<T>& x, const Var<T>& m) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4 && m->val.ndim() == 4 && m->val.dim(1) == 1 &&
                  m->val.dim(0) == s[0] && m->val.dim(2) == s[2] && m->val.dim(3) == s[3],
              "mul_bcast_c1 shape mismatch");
  const i64 B = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out(s);
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c) {
      const T* xm = x->val.data() + (b * C + c) * HW;
      const T* mm = m->val.data() + b * HW;
      T* o = out.data() + (b * C + c) * HW;
      for (i64 i = 0; i < HW; ++i) o[i] = xm[i] * mm[i];
    }
  return make_op<T>(std::move(out), {x, m}, [x, m, B, C, HW](Node<T>& n) {
    if (x->requires_grad) {
      auto& gx = x->g();
      for (i64 b = 0; b < B; ++b)
        for (i64 c = 0; c < C; ++c) {
          const T* gm = n.grad.data() + (b * C + c) * HW;
          const T* mm = m->val.data() + b * HW;
          T* o = gx.data() + (b * C + c) * HW;
          for (i64 i = 0; i < HW; ++i) o[i] += gm[i] * mm[i];
        }
    }
    if (m->requires_grad) {
      auto& gmac = m->g();
      for (i64 b = 0; b < B; ++b)
        for (i64 c = 0; c < C; ++c) {
          const T* gm = n.grad.data() + (b * C + c) * HW;
          const T* xm = x->val.data() + (b * C + c) * HW;
          T* o = gmac.data() + b * HW;
          for (i64 i = 0; i < HW; ++i) o[i] += gm[i] * xm[i];
        }
    }
  });
}

// x [B,C,H,W] + e [B,C]: per-channel bias broadcast over space
template <class T>
Var<T> add_bcast_hw(const Var<T>& x, const Var<T>& e) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4 && e->val.ndim() == 2 && e->val.dim(0) == s[0] &&
                  e->val.dim(1) == s[1],
              "add_bcast_hw shape mismatch");
  const i64 B = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out(s);
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c) {
      const T* xm = x->val.data() + (b * C + c) * HW;
      T ev = e->val[b * C + c];
      T* o = out.data() + (b * C + c) * HW;
      for (i64 i = 0; i < HW; ++i) o[i] = xm[i] + ev;
    }
  return make_op<T>(std::move(out), {x, e}, [x, e, B, C, HW](Node<T>& n) {
    if (x->requires_grad) {
      auto& gx = x->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) gx[i] += n.grad[i];
    }
    if (e->requires_grad) {
      auto& ge = e->g();
      for (i64 b = 0; b < B; ++b)
        for (i64 c = 0; c < C; ++c) {
          const T* gm = n.grad.data() + (b * C + c) * HW;
          T acc = 0;
          for (i64 i = 0; i < HW; ++i) acc += gm[i];
          ge[b * C + c] += acc;
        }
    }
  });
}

// x [B,P,C] + m [P,C]: broadcast over the batch axis
template <class T>
Var<T> add_bcast_batch(const Var<T>& x, const Var<T>& m) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 3 && m->val.ndim() == 2 && m->val.dim(0) == s[1] &&
                  m->val.dim(1) == s[2],
              "add_bcast_batch shape mismatch");
  const i64 B = s[0], PC = s[1] * s[2];
  Tensor<T> out(s);
  for (i64 b = 0; b < B; ++b)
    for (i64 i = 0; i < PC; ++i) out[b * PC + i] = x->val[b * PC + i] + m->val[i];
  return make_op<T>(std::move(out), {x, m}, [x, m, B, PC](Node<T>& n) {
    if (x->requires_grad) {
      auto& gx = x->g();
      for (i64 i = 0; i < n.grad.numel(); ++i) gx[i] += n.grad[i];
    }
    if (m->requires_grad) {
      auto& gm = m->g();
      for (i64 b = 0; b < B; ++b)
        for (i64 i = 0; i < PC; ++i) gm[i] += n.grad[b * PC + i];
    }
  });
}

// x [P,K,C] row-scaled by a constant weight table m [P,K]
template <class T>
Var<T> scale_rows(const Var<T>& x, Tensor<T> m) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 3 && m.ndim() == 2 && m.dim(0) == s[0] && m.dim(1) == s[1],
              "scale_rows shape mismatch");
  const i64 PK = s[0] * s[1], C = s[2];
  Tensor<T> out(s);
  for (i64 r = 0; r < PK; ++r) {
    T wv = m[r];
    const T* xm = x->val.data() + r * C;
    T* o = out.data() + r * C;
    for (i64 c = 0; c < C; ++c) o[c] = xm[c] * wv;
  }
  return make_op<T>(std::move(out), {x}, [x, m = std::move(m), PK, C](Node<T>& n) {
    auto& gx = x->g();
    for (i64 r = 0; r < PK; ++r) {
      T wv = m[r];
      const T* gm = n.grad.data() + r * C;
      T* o = gx.data() + r * C;
      for (i64 c = 0; c < C; ++c) o[c] += gm[c] * wv;
    }
  });
}

// ------------------------------------------------------------------- linear

// x [N,Din] * W^T [Din,Dout] + b
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  VEILA_CHECK(x->val.ndim() == 2 && w->val.ndim() == 2, "linear wants 2-d inputs");
  const i64 N = x->val.dim(0), din = x->val.dim(1), dout = w->val.dim(0);
  VEILA_CHECK(w->val.dim(1) == din, "linear weight shape mismatch");
  Tensor<T> out({N, dout});
  gemm(false, true, N, dout, din, T(1), x->val.data(), din, w->val.data(), din, T(0),
       out.data(), dout);
  if (b) {
    VEILA_CHECK(b->val.numel() == dout, "linear bias mismatch");
    for (i64 i = 0; i < N; ++i)
      for (i64 j = 0; j < dout; ++j) out[i * dout + j] += b->val[j];
  }
  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  return make_op<T>(std::move(out), std::move(parents), [x, w, b, N, din, dout](Node<T>& n) {
    if (x->requires_grad)
      gemm(false, false, N, din, dout, T(1), n.grad.data(), dout, w->val.data(), din, T(1),
           x->g().data(), din);
    if (w->requires_grad)
      gemm(true, false, dout, din, N, T(1), n.grad.data(), dout, x->val.data(), din, T(1),
           w->g().data(), din);
    if (b && b->requires_grad) {
      auto& gb = b->g();
      for (i64 i = 0; i < N; ++i)
        for (i64 j = 0; j < dout; ++j) gb[j] += n.grad[i * dout + j];
    }
  });
}

// --------------------------------------------------------------------- conv

// x [B,Ci,H,W], w [Co,Ci,kh,kw], optional b [Co]; rows zero-padded, columns
// circular (panoramic wrap) or zero-padded. Recomputes im2col in backward.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, i64 stride, bool circ) {
  ConvGeom g = conv_geom(x->val, w->val, stride);
  Tensor<T> out;
  std::vector<T> cols;
  conv2d_forward(x->val, w->val, b ? b->val : Tensor<T>{}, stride, circ, out, cols);
  std::vector<Var<T>> parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
  return make_op<T>(std::move(out), std::move(parents), [x, w, b, g, circ](Node<T>& n) {
    const i64 ckk = g.ci * g.kh * g.kw;
    const i64 owo = g.ho * g.wo;
    std::vector<T> cols(size_t(ckk * owo));
    std::vector<T> dcols(x->requires_grad ? size_t(ckk * owo) : 0);
    for (i64 bi = 0; bi < g.b; ++bi) {
      const T* gy = n.grad.data() + bi * g.co * owo;
      if (w->requires_grad || x->requires_grad)
        im2col(x->val.data() + bi * g.ci * g.h * g.w, g, circ, cols.data());
      if (w->requires_grad)
        gemm(false, true, g.co, ckk, owo, T(1), gy, owo, cols.data(), owo, T(1),
             w->g().data(), ckk);
      if (x->requires_grad) {
        gemm(true, false, ckk, owo, g.co, T(1), w->val.data(), ckk, gy, owo, T(0),
             dcols.data(), owo);
        col2im_add(dcols.data(), g, circ, x->g().data() + bi * g.ci * g.h * g.w);
      }
      if (b && b->requires_grad) {
        auto& gb = b->g();
        for (i64 co = 0; co < g.co; ++co) {
          const T* row_ptr = gy + co * owo;
          T acc = 0;
          for (i64 i = 0; i < owo; ++i) acc += row_ptr[i];
          gb[co] += acc;
        }
      }
    }
  });
}

// ---------------------------------------------------------------- group norm

// Per (batch, group) normalization with affine channel parameters.
template <class T>
Var<T> group_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, i64 groups,
                  T eps = T(1e-5)) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4, "group_norm wants [B,C,H,W]");
  const i64 B = s[0], C = s[1], HW = s[2] * s[3];
  VEILA_CHECK(C % groups == 0, "channels not divisible by groups");
  VEILA_CHECK(gamma->val.numel() == C && beta->val.numel() == C, "affine shape mismatch");
  const i64 cg = C / groups;
  const i64 n_elem = cg * HW;
  Tensor<T> xhat(s);
  Tensor<T> inv_std({B, groups});
  Tensor<T> out(s);
  for (i64 b = 0; b < B; ++b)
    for (i64 g = 0; g < groups; ++g) {
      const T* base = x->val.data() + (b * C + g * cg) * HW;
      T mean = 0;
      for (i64 i = 0; i < n_elem; ++i) mean += base[i];
      mean /= T(n_elem);
      T var = 0;
      for (i64 i = 0; i < n_elem; ++i) {
        T d = base[i] - mean;
        var += d * d;
      }
      var /= T(n_elem);
      T istd = T(1) / std::sqrt(var + eps);
      inv_std.at(b, g) = istd;
      T* xh = xhat.data() + (b * C + g * cg) * HW;
      T* o = out.data() + (b * C + g * cg) * HW;
      for (i64 c = 0; c < cg; ++c) {
        T ga = gamma->val[g * cg + c];
        T be = beta->val[g * cg + c];
        for (i64 i = 0; i < HW; ++i) {
          T v = (base[c * HW + i] - mean) * istd;
          xh[c * HW + i] = v;
          o[c * HW + i] = ga * v + be;
        }
      }
    }
  return make_op<T>(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), B, C, HW, cg,
       groups, n_elem](Node<T>& n) {
        if (gamma->requires_grad || beta->requires_grad) {
          auto& gg = gamma->g();
          auto& gb = beta->g();
          for (i64 b = 0; b < B; ++b)
            for (i64 c = 0; c < C; ++c) {
              const T* gm = n.grad.data() + (b * C + c) * HW;
              const T* xh = xhat.data() + (b * C + c) * HW;
              T sg = 0, sb = 0;
              for (i64 i = 0; i < HW; ++i) {
                sg += gm[i] * xh[i];
                sb += gm[i];
              }
              gg[c] += sg;
              gb[c] += sb;
            }
        }
        if (!x->requires_grad) return;
        auto& gx = x->g();
        for (i64 b = 0; b < B; ++b)
          for (i64 g = 0; g < groups; ++g) {
            const T* gm = n.grad.data() + (b * C + g * cg) * HW;
            const T* xh = xhat.data() + (b * C + g * cg) * HW;
            T s1 = 0, s2 = 0;
            for (i64 c = 0; c < cg; ++c) {
              T ga = gamma->val[g * cg + c];
              for (i64 i = 0; i < HW; ++i) {
                T dxh = gm[c * HW + i] * ga;
                s1 += dxh;
                s2 += dxh * xh[c * HW + i];
              }
            }
            T istd = inv_std.at(b, g);
            T invn = T(1) / T(n_elem);
            T* o = gx.data() + (b * C + g * cg) * HW;
            for (i64 c = 0; c < cg; ++c) {
              T ga = gamma->val[g * cg + c];
              for (i64 i = 0; i < HW; ++i) {
                T dxh = gm[c * HW + i] * ga;
                o[c * HW + i] += istd * (dxh - invn * (s1 + xh[c * HW + i] * s2));
              }
            }
          }
      });
}

// -------------------------------------------------------------- shape moves

template <class T>
Var<T> reshape(const Var<T>& x, std::vector<i64> shape) {
  Tensor<T> out = x->val.reshaped(shape);
  return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
    auto& gx = x->g();
    for (i64 i = 0; i < n.grad.numel(); ++i) gx[i] += n.grad[i];
  });
}

// [B,C,H,W] -> [B,HW,C]
template <class T>
Var<T> to_tokens(const Var<T>& x) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4, "to_tokens wants [B,C,H,W]");
  const i64 B = s[0], C = s[1], HW = s[2] * s[3];
  Tensor<T> out({B, HW, C});
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c) {
      const T* xm = x->val.data() + (b * C + c) * HW;
      T* o = out.data() + b * HW * C + c;
      for (i64 i = 0; i < HW; ++i) o[i * C] = xm[i];
    }
  return make_op<T>(std::move(out), {x}, [x, B, C, HW](Node<T>& n) {
    auto& gx = x->g();
    for (i64 b = 0; b < B; ++b)
      for (i64 c = 0; c < C; ++c) {
        T* xm = gx.data() + (b * C + c) * HW;
        const T* o = n.grad.data() + b * HW * C + c;
        for (i64 i = 0; i < HW; ++i) xm[i] += o[i * C];
      }
  });
}

// [B,HW,C] -> [B,C,H,W]
template <class T>
Var<T> from_tokens(const Var<T>& x, i64 H, i64 W) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 3 && s[1] == H * W, "from_tokens shape mismatch");
  const i64 B = s[0], C = s[2], HW = s[1];
  Tensor<T> out({B, C, H, W});
  for (i64 b = 0; b < B; ++b)
    for (i64 c = 0; c < C; ++c) {
      T* o = out.data() + (b * C + c) * HW;
      const T* xm = x->val.data() + b * HW * C + c;
      for (i64 i = 0; i < HW; ++i) o[i] = xm[i * C];
    }
  return make_op<T>(std::move(out), {x}, [x, B, C, HW](Node<T>& n) {
    auto& gx = x->g();
    for (i64 b = 0; b < B; ++b)
      for (i64 c = 0; c < C; ++c) {
        const T* o = n.grad.data() + (b * C + c) * HW;
        T* xm = gx.data() + b * HW * C + c;
        for (i64 i = 0; i < HW; ++i) xm[i * C] += o[i];
      }
  });
}

// Concatenate along an axis; all other dims must agree.
template <class T>
Var<T> concat(const std::vector<Var<T>>& parts, int axis) {
  VEILA_CHECK(!parts.empty(), "concat of nothing");
  auto shape = parts[0]->val.shape();
  i64 total = 0;
  for (const auto& p : parts) {
    VEILA_CHECK(p->val.ndim() == int(shape.size()), "concat rank mismatch");
    for (int d = 0; d < int(shape.size()); ++d)
      if (d != axis)
        VEILA_CHECK(p->val.dim(d) == shape[size_t(d)], "concat dim mismatch");
    total += p->val.dim(axis);
  }
  i64 outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= shape[size_t(d)];
  for (int d = axis + 1; d < int(shape.size()); ++d) inner *= shape[size_t(d)];
  auto out_shape = shape;
  out_shape[size_t(axis)] = total;
  Tensor<T> out(out_shape);
  i64 offset = 0;
  for (const auto& p : parts) {
    const i64 len = p->val.dim(axis) * inner;
    for (i64 o = 0; o < outer; ++o)
      std::copy(p->val.data() + o * len, p->val.data() + (o + 1) * len,
                out.data() + o * total * inner + offset);
    offset += len;
  }
  std::vector<Var<T>> parents(parts.begin(), parts.end());
  return make_op<T>(std::move(out), std::move(parents),
                    [parts, outer, inner, total](Node<T>& n) {
                      i64 offset = 0;
                      for (const auto& p : parts) {
                        const i64 len = p->val.dim(p->val.ndim() - 1) * 0 + 0;
                        (void)len;
                        const i64 plen = p->val.numel() / outer;
                        if (p->requires_grad) {
                          auto& gp = p->g();
                          for (i64 o = 0; o < outer; ++o) {
                            const T* src = n.grad.data() + o * total * inner + offset;
                            T* dst = gp.data() + o * plen;
                            for (i64 i = 0; i < plen; ++i) dst[i] += src[i];
                          }
                        }
                        offset += plen;
                      }
                    });
}

// Stack equal-shaped tensors along a new leading axis.
template <class T>
Var<T> stack0(const std::vector<Var<T>>& parts) {
  VEILA_CHECK(!parts.empty(), "stack of nothing");
  const i64 each = parts[0]->val.numel();
  std::vector<i64> shape{i64(parts.size())};
  for (i64 d : parts[0]->val.shape()) shape.push_back(d);
  Tensor<T> out(shape);
  for (size_t i = 0; i < parts.size(); ++i) {
    VEILA_CHECK(parts[i]->val.shape() == parts[0]->val.shape(), "stack shape mismatch");
    std::copy(parts[i]->val.begin(), parts[i]->val.end(), out.data() + i64(i) * each);
  }
  std::vector<Var<T>> parents(parts.begin(), parts.end());
  return make_op<T>(std::move(out), std::move(parents), [parts, each](Node<T>& n) {
    for (size_t i = 0; i < parts.size(); ++i) {
      if (!parts[i]->requires_grad) continue;
      auto& gp = parts[i]->g();
      const T* src = n.grad.data() + i64(i) * each;
      for (i64 j = 0; j < each; ++j) gp[j] += src[j];
    }
  });
}

// ----------------------------------------------------------------- resample

// Nearest 2x upsample of [B,C,H,W].
template <class T>
Var<T> upsample2x(const Var<T>& x) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4, "upsample2x wants [B,C,H,W]");
  const i64 BC = s[0] * s[1], H = s[2], W = s[3];
  Tensor<T> out({s[0], s[1], H * 2, W * 2});
  for (i64 p = 0; p < BC; ++p) {
    const T* xm = x->val.data() + p * H * W;
    T* o = out.data() + p * H * W * 4;
    for (i64 y = 0; y < 2 * H; ++y)
      for (i64 xw = 0; xw < 2 * W; ++xw) o[y * 2 * W + xw] = xm[(y / 2) * W + xw / 2];
  }
  return make_op<T>(std::move(out), {x}, [x, BC, H, W](Node<T>& n) {
    auto& gx = x->g();
    for (i64 p = 0; p < BC; ++p) {
      const T* gm = n.grad.data() + p * H * W * 4;
      T* o = gx.data() + p * H * W;
      for (i64 y = 0; y < 2 * H; ++y)
        for (i64 xw = 0; xw < 2 * W; ++xw) o[(y / 2) * W + xw / 2] += gm[y * 2 * W + xw];
    }
  });
}

namespace detail {
// Half-pixel (align-corners-false) source coordinate with border replication.
inline void interp_axis(i64 out_len, i64 in_len, i64 i, i64& lo, i64& hi, double& frac) {
  double src = (double(i) + 0.5) * double(in_len) / double(out_len) - 0.5;
  double fl = std::floor(src);
  frac = src - fl;
  lo = std::clamp(i64(fl), i64(0), in_len - 1);
  hi = std::clamp(i64(fl) + 1, i64(0), in_len - 1);
}
}  // namespace detail

// Bilinear resize of [B,C,H,W] with the half-pixel convention.
template <class T>
Var<T> bilinear_resize(const Var<T>& x, i64 ho, i64 wo) {
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 4, "bilinear_resize wants [B,C,H,W]");
  const i64 BC = s[0] * s[1], H = s[2], W = s[3];
  std::vector<i64> y0(ho), y1(ho), x0(wo), x1(wo);
  std::vector<T> fy(ho), fx(wo);
  for (i64 i = 0; i < ho; ++i) {
    double f;
    detail::interp_axis(ho, H, i, y0[i], y1[i], f);
    fy[i] = T(f);
  }
  for (i64 i = 0; i < wo; ++i) {
    double f;
    detail::interp_axis(wo, W, i, x0[i], x1[i], f);
    fx[i] = T(f);
  }
  Tensor<T> out({s[0], s[1], ho, wo});
  for (i64 p = 0; p < BC; ++p) {
    const T* xm = x->val.data() + p * H * W;
    T* o = out.data() + p * ho * wo;
    for (i64 y = 0; y < ho; ++y)
      for (i64 xi = 0; xi < wo; ++xi) {
        T a = xm[y0[y] * W + x0[xi]], bv = xm[y0[y] * W + x1[xi]];
        T c = xm[y1[y] * W + x0[xi]], d = xm[y1[y] * W + x1[xi]];
        T top = a + (bv - a) * fx[xi];
        T bot = c + (d - c) * fx[xi];
        o[y * wo + xi] = top + (bot - top) * fy[y];
      }
  }
  return make_op<T>(std::move(out), {x},
                    [x, BC, H, W, ho, wo, y0, y1, x0, x1, fy, fx](Node<T>& n) {
                      auto& gx = x->g();
                      for (i64 p = 0; p < BC; ++p) {
                        const T* gm = n.grad.data() + p * ho * wo;
                        T* o = gx.data() + p * H * W;
                        for (i64 y = 0; y < ho; ++y)
                          for (i64 xi = 0; xi < wo; ++xi) {
                            T gv = gm[y * wo + xi];
                            T wy1 = fy[y], wy0 = T(1) - wy1;
                            T wx1 = fx[xi], wx0 = T(1) - wx1;
                            o[y0[y] * W + x0[xi]] += gv * wy0 * wx0;
                            o[y0[y] * W + x1[xi]] += gv * wy0 * wx1;
                            o[y1[y] * W + x0[xi]] += gv * wy1 * wx0;
                            o[y1[y] * W + x1[xi]] += gv * wy1 * wx1;
                          }
                      }
                    });
}

// Gather [M,C] feature vectors from f [C,H,W] at continuous grid coords
// pts [M,2] = (x, y), border-replicated. Locations are constants (projective
// geometry), so only df flows.
template <class T>
Var<T> bilinear_gather(const Var<T>& f, Tensor<T> pts) {
  const auto& s = f->val.shape();
  VEILA_CHECK(s.size() == 3, "bilinear_gather wants [C,H,W]");
  VEILA_CHECK(pts.ndim() == 2 && pts.dim(1) == 2, "pts must be [M,2]");
  const i64 C = s[0], H = s[1], W = s[2], M = pts.dim(0);
  Tensor<T> out({M, C});
  auto corners = [H, W](T xc, T yc, i64& xlo, i64& xhi, i64& ylo, i64& yhi, T& fx, T& fy) {
    double flx = std::floor(double(xc)), fly = std::floor(double(yc));
    fx = T(double(xc) - flx);
    fy = T(double(yc) - fly);
    xlo = std::clamp(i64(flx), i64(0), W - 1);
    xhi = std::clamp(i64(flx) + 1, i64(0), W - 1);
    ylo = std::clamp(i64(fly), i64(0), H - 1);
    yhi = std::clamp(i64(fly) + 1, i64(0), H - 1);
  };
  for (i64 m = 0; m < M; ++m) {
    i64 xlo, xhi, ylo, yhi;
    T fx, fy;
    corners(pts.at(m, 0), pts.at(m, 1), xlo, xhi, ylo, yhi, fx, fy);
    T* o = out.data() + m * C;
    for (i64 c = 0; c < C; ++c) {
      const T* fp = f->val.data() + c * H * W;
      T top = fp[ylo * W + xlo] + (fp[ylo * W + xhi] - fp[ylo * W + xlo]) * fx;
      T bot = fp[yhi * W + xlo] + (fp[yhi * W + xhi] - fp[yhi * W + xlo]) * fx;
      o[c] = top + (bot - top) * fy;
    }
  }
  return make_op<T>(std::move(out), {f},
                    [f, pts = std::move(pts), corners, C, H, W, M](Node<T>& n) {
                      auto& gf = f->g();
                      for (i64 m = 0; m < M; ++m) {
                        i64 xlo, xhi, ylo, yhi;
                        T fx, fy;
                        corners(pts.at(m, 0), pts.at(m, 1), xlo, xhi, ylo, yhi, fx, fy);
                        const T* gm = n.grad.data() + m * C;
                        for (i64 c = 0; c < C; ++c) {
                          T* fp = gf.data() + c * H * W;
                          T gv = gm[c];
                          fp[ylo * W + xlo] += gv * (T(1) - fy) * (T(1) - fx);
                          fp[ylo * W + xhi] += gv * (T(1) - fy) * fx;
                          fp[yhi * W + xlo] += gv * fy * (T(1) - fx);
                          fp[yhi * W + xhi] += gv * fy * fx;
                        }
                      }
                    });
}

// --------------------------------------------------------------- reductions

template <class T>
Var<T> sum_axis1(const Var<T>& x) {  // [P,K,C] -> [P,C]
  const auto& s = x->val.shape();
  VEILA_CHECK(s.size() == 3, "sum_axis1 wants [P,K,C]");
  const i64 P = s[0], K = s[1], C = s[2];
  Tensor<T> out = Tensor<T>::zeros({P, C});
  for (i64 p = 0; p < P; ++p)
    for (i64 k = 0; k < K; ++k) {
      const T* xm = x->val.data() + (p * K + k) * C;
      T* o = out.data() + p * C;
      for (i64 c = 0; c < C; ++c) o[c] += xm[c];
    }
  return make_op<T>(std::move(out), {x}, [x, P, K, C](Node<T>& n) {
    auto& gx = x->g();
    for (i64 p = 0; p < P; ++p)
      for (i64 k = 0; k < K; ++k) {
        T* xm = gx.data() + (p * K + k) * C;
        const T* o = n.grad.data() + p * C;
        for (i64 c = 0; c < C; ++c) xm[c] += o[c];
      }
  });
}

template <class T>
Var<T> mean_all(const Var<T>& x) {
  const i64 N = x->val.numel();
  T acc = 0;
  for (i64 i = 0; i < N; ++i) acc += x->val[i];
  Tensor<T> out = Tensor<T>::full({1}, acc / T(N));
  return make_op<T>(std::move(out), {x}, [x, N](Node<T>& n) {
    auto& gx = x->g();
    T gv = n.grad[0] / T(N);
    for (i64 i = 0; i < N; ++i) gx[i] += gv;
  });
}

template <class T>
Var<T> sum_all(const Var<T>& x) {
  const i64 N = x->val.numel();
  T acc = 0;
  for (i64 i = 0; i < N; ++i) acc += x->val[i];
  Tensor<T> out = Tensor<T>::full({1}, acc);
  return make_op<T>(std::move(out), {x}, [x, N](Node<T>& n) {
    auto& gx = x->g();
    T gv = n.grad[0];
    for (i64 i = 0; i < N; ++i) gx[i] += gv;
  });
}

// mean((a-b)^2) against a constant target
template <class T>
Var<T> mse(const Var<T>& pred, const Tensor<T>& target) {
  VEILA_CHECK(pred->val.shape() == target.shape(), "mse shape mismatch");
  auto diff = sub(pred, constant(target.clone()));
  return mean_all(mul(diff, diff));
}

}  // namespace veila::ad
