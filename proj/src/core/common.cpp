#include "core/common.hpp"

#include <cblas.h>

#include <atomic>
#include <thread>
#include <cstdlib>

extern "C" void openblas_set_num_threads(int);

namespace lc {

const char* err_code_name(ErrCode c) {
  switch (c) {
    case ErrCode::invalid_argument: return "EINVAL";
    case ErrCode::shape_mismatch: return "ESHAPE";
    case ErrCode::io: return "EIO";
    case ErrCode::format: return "EFORMAT";
    case ErrCode::numeric: return "ENUMERIC";
    case ErrCode::state: return "ESTATE";
  }
  return "EUNKNOWN";
}

int env_thread_cap() {
  const char* v = std::getenv("LINECOUNTER_THREADS");
  if (!v) return 0;
  int n = std::atoi(v);
  return n > 0 ? n : 0;
}

static std::atomic<int> g_blas_threads{0};

void set_blas_threads(int n) {
  if (n < 1) n = 1;
  g_blas_threads.store(n);
  openblas_set_num_threads(n);
}

int blas_threads() {
  int n = g_blas_threads.load();
  if (n == 0) {
    // recurrent GEMMs are small and run fastest single-threaded; default to 1
    // and let LINECOUNTER_THREADS (or lc_set_threads) raise the cap
    n = env_thread_cap() ? env_thread_cap() : 1;
    set_blas_threads(n);
  }
  return n;
}

void gemm_f32(bool ta, bool tb, int m, int n, int k, float alpha, const float* a, int lda,
              const float* b, int ldb, float beta, float* c, int ldc) {
  blas_threads();
  cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm_f64(bool ta, bool tb, int m, int n, int k, double alpha, const double* a, int lda,
              const double* b, int ldb, double beta, double* c, int ldc) {
  blas_threads();
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n,
              k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace lc
