#pragma once

#include "veila/ad/ops.hpp"

namespace veila::ad {

// Masked per-pixel attention over a small key/value set: for every (batch,
// pixel), out = Softmax(q . v_k / sqrt(d_h)) . v_k over unmasked k, per head,
// with keys equal to values. Softmax subtracts the running max; fully masked
// pixels produce a zero row. mask is a constant [P,K] validity table shared
// across the batch.
template <class T>
Var<T> perpixel_attention(const Var<T>& q, const Var<T>& v, Tensor<u8> mask, i64 heads) {
  const auto& qs = q->val.shape();
  const auto& vs = v->val.shape();
  VEILA_CHECK(qs.size() == 3 && vs.size() == 4, "attention wants q [B,P,C], v [B,P,K,C]");
  const i64 B = qs[0], P = qs[1], C = qs[2], K = vs[2];
  VEILA_CHECK(vs[0] == B && vs[1] == P && vs[3] == C, "attention shape mismatch");
  VEILA_CHECK(C % heads == 0, "channels not divisible by heads");
  VEILA_CHECK(mask.ndim() == 2 && mask.dim(0) == P && mask.dim(1) == K, "mask must be [P,K]");
  const i64 dh = C / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));

  Tensor<T> out = Tensor<T>::zeros({B, P, C});
  Tensor<T> probs = Tensor<T>::zeros({B, P, heads, K});
  std::vector<T> logits(size_t(K), T(0));
  for (i64 b = 0; b < B; ++b)
    for (i64 p = 0; p < P; ++p) {
      const u8* mrow = mask.data() + p * K;
      const T* qrow = q->val.data() + (b * P + p) * C;
      const T* vrow = v->val.data() + ((b * P + p) * K) * C;
      for (i64 h = 0; h < heads; ++h) {
        const T* qh = qrow + h * dh;
        T maxl = 0;
        bool any = false;
        for (i64 k = 0; k < K; ++k) {
          if (!mrow[k]) continue;
          T acc = 0;
          const T* vh = vrow + k * C + h * dh;
          for (i64 d = 0; d < dh; ++d) acc += qh[d] * vh[d];
          acc *= inv_sqrt;
          logits[size_t(k)] = acc;
          maxl = any ? std::max(maxl, acc) : acc;
          any = true;
        }
        if (!any) continue;
        T denom = 0;
        T* prow = probs.data() + ((b * P + p) * heads + h) * K;
        for (i64 k = 0; k < K; ++k) {
          if (!mrow[k]) continue;
          T e = std::exp(logits[size_t(k)] - maxl);
          prow[k] = e;
          denom += e;
        }
        T* orow = out.data() + (b * P + p) * C + h * dh;
        for (i64 k = 0; k < K; ++k) {
          if (!mrow[k]) continue;
          prow[k] /= denom;
          const T* vh = vrow + k * C + h * dh;
          T pk = prow[k];
          for (i64 d = 0; d < dh; ++d) orow[d] += pk * vh[d];
        }
      }
    }

  return make_op<T>(
      std::move(out), {q, v},
      [q, v, mask = std::move(mask), probs = std::move(probs), B, P, C, K, heads, dh,
       inv_sqrt](Node<T>& n) {
        std::vector<T> dlogit(size_t(K), T(0));
        for (i64 b = 0; b < B; ++b)
          for (i64 p = 0; p < P; ++p) {
            const u8* mrow = mask.data() + p * K;
            const T* qrow = q->val.data() + (b * P + p) * C;
            const T* vrow = v->val.data() + ((b * P + p) * K) * C;
            T* gq = q->requires_grad ? q->g().data() + (b * P + p) * C : nullptr;
            T* gv = v->requires_grad ? v->g().data() + ((b * P + p) * K) * C : nullptr;
            for (i64 h = 0; h < heads; ++h) {
              const T* prow = probs.data() + ((b * P + p) * heads + h) * K;
              const T* gout = n.grad.data() + (b * P + p) * C + h * dh;
              // dp_k = gout . v_k ; dlogit = p*(dp - sum p dp)
              T sum_pdp = 0;
              bool any = false;
              for (i64 k = 0; k < K; ++k) {
                if (!mrow[k]) continue;
                any = true;
                const T* vh = vrow + k * C + h * dh;
                T dp = 0;
                for (i64 d = 0; d < dh; ++d) dp += gout[d] * vh[d];
                dlogit[size_t(k)] = dp;
                sum_pdp += prow[k] * dp;
              }
              if (!any) continue;
              for (i64 k = 0; k < K; ++k) {
                if (!mrow[k]) continue;
                T dl = prow[k] * (dlogit[size_t(k)] - sum_pdp);
                const T* vh = vrow + k * C + h * dh;
                if (gq) {
                  T* gqh = gq + h * dh;
                  for (i64 d = 0; d < dh; ++d) gqh[d] += dl * inv_sqrt * vh[d];
                }
                if (gv) {
                  T* gvh = gv + k * C + h * dh;
                  const T* qh = qrow + h * dh;
                  T pk = prow[k];
                  for (i64 d = 0; d < dh; ++d)
                    gvh[d] += dl * inv_sqrt * qh[d] + pk * gout[d];
                }
              }
            }
          }
      });
}

// Dense multi-head self/cross attention over token sequences:
// out_i = Softmax_j(q_i . k_j / sqrt(d_h)) v_j, all [B,N,C].
template <class T>
Var<T> global_attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, i64 heads) {
  const auto& s = q->val.shape();
  VEILA_CHECK(s.size() == 3, "global_attention wants [B,N,C]");
  VEILA_CHECK(k->val.shape() == s && v->val.shape() == s, "q/k/v shape mismatch");
  const i64 B = s[0], N = s[1], C = s[2];
  VEILA_CHECK(C % heads == 0, "channels not divisible by heads");
  const i64 dh = C / heads;
  const T inv_sqrt = T(1) / std::sqrt(T(dh));

  Tensor<T> out = Tensor<T>::zeros({B, N, C});
  Tensor<T> probs({B, heads, N, N});
  std::vector<T> logits(size_t(N), T(0));
  for (i64 b = 0; b < B; ++b)
    for (i64 h = 0; h < heads; ++h)
      for (i64 i = 0; i < N; ++i) {
        const T* qh = q->val.data() + (b * N + i) * C + h * dh;
        T maxl = -std::numeric_limits<T>::infinity();
        for (i64 j = 0; j < N; ++j) {
          const T* kh = k->val.data() + (b * N + j) * C + h * dh;
          T acc = 0;
          for (i64 d = 0; d < dh; ++d) acc += qh[d] * kh[d];
          acc *= inv_sqrt;
          logits[size_t(j)] = acc;
          maxl = std::max(maxl, acc);
        }
        T denom = 0;
        T* prow = probs.data() + ((b * heads + h) * N + i) * N;
        for (i64 j = 0; j < N; ++j) {
          T e = std::exp(logits[size_t(j)] - maxl);
          prow[j] = e;
          denom += e;
        }
        T* orow = out.data() + (b * N + i) * C + h * dh;
        for (i64 j = 0; j < N; ++j) {
          prow[j] /= denom;
          const T* vh = v->val.data() + (b * N + j) * C + h * dh;
          T pj = prow[j];
          for (i64 d = 0; d < dh; ++d) orow[d] += pj * vh[d];
        }
      }

  return make_op<T>(
      std::move(out), {q, k, v},
      [q, k, v, probs = std::move(probs), B, N, C, heads, dh, inv_sqrt](Node<T>& n) {
        std::vector<T> dlogit(size_t(N), T(0));
        for (i64 b = 0; b < B; ++b)
          for (i64 h = 0; h < heads; ++h)
            for (i64 i = 0; i < N; ++i) {
              const T* prow = probs.data() + ((b * heads + h) * N + i) * N;
              const T* gout = n.grad.data() + (b * N + i) * C + h * dh;
              T sum_pdp = 0;
              for (i64 j = 0; j < N; ++j) {
                const T* vh = v->val.data() + (b * N + j) * C + h * dh;
                T dp = 0;
                for (i64 d = 0; d < dh; ++d) dp += gout[d] * vh[d];
                dlogit[size_t(j)] = dp;
                sum_pdp += prow[j] * dp;
                if (v->requires_grad) {
                  T* gvh = v->g().data() + (b * N + j) * C + h * dh;
                  T pj = prow[j];
                  for (i64 d = 0; d < dh; ++d) gvh[d] += pj * gout[d];
                }
              }
              const T* qh = q->val.data() + (b * N + i) * C + h * dh;
              for (i64 j = 0; j < N; ++j) {
                T dl = prow[j] * (dlogit[size_t(j)] - sum_pdp) * inv_sqrt;
                if (q->requires_grad) {
                  const T* kh = k->val.data() + (b * N + j) * C + h * dh;
                  T* gqh = q->g().data() + (b * N + i) * C + h * dh;
                  for (i64 d = 0; d < dh; ++d) gqh[d] += dl * kh[d];
                }
                if (k->requires_grad) {
                  T* gkh = k->g().data() + (b * N + j) * C + h * dh;
                  for (i64 d = 0; d < dh; ++d) gkh[d] += dl * qh[d];
                }
              }
            }
      });
}

// Validity flag per pixel: 1 where any sample in the mask row is set.
inline Tensor<u8> row_valid_flags(const Tensor<u8>& mask) {
  const i64 P = mask.dim(0), K = mask.dim(1);
  Tensor<u8> out({P});
  for (i64 p = 0; p < P; ++p) {
    u8 any = 0;
    for (i64 k = 0; k < K; ++k) any |= mask.at(p, k);
    out[p] = any;
  }
  return out;
}

}  // namespace veila::ad
