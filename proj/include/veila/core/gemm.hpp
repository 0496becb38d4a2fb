#pragma once

#include <cblas.h>

#include "veila/core/common.hpp"

namespace veila {

inline void blas_single_thread() { openblas_set_num_threads(1); }

// Row-major C[m,n] = alpha * op(A) * op(B) + beta * C
inline void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, float alpha,
                 const float* a, i64 lda, const float* b, i64 ldb, float beta,
                 float* c, i64 ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
              alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
}

inline void gemm(bool trans_a, bool trans_b, i64 m, i64 n, i64 k, double alpha,
                 const double* a, i64 lda, const double* b, i64 ldb, double beta,
                 double* c, i64 ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, int(m), int(n), int(k),
              alpha, a, int(lda), b, int(ldb), beta, c, int(ldc));
}

}  // namespace veila
