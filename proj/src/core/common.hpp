#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lc {

enum class ErrCode {
  invalid_argument,
  shape_mismatch,
  io,
  format,
  numeric,
  state,
};

const char* err_code_name(ErrCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrCode code() const { return code_; }

 private:
  ErrCode code_;
};

[[noreturn]] inline void fail(ErrCode code, const std::string& msg) { throw Error(code, msg); }

// Deterministic RNG. mt19937_64 is pinned by the standard; the distribution
// mappings below are hand-rolled so streams are bit-identical across
// platforms and library versions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // [0,1)
  double uniform() { return static_cast<double>(eng_() >> 11) * (1.0 / 9007199254740992.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive range
  int uniform_int(int lo, int hi) {
    if (hi < lo) fail(ErrCode::invalid_argument, "uniform_int: empty range");
    uint64_t span = static_cast<uint64_t>(hi) - static_cast<uint64_t>(lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  double normal() {
    // Box-Muller, fresh pair every call (no cached spare, keeps forks independent)
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // derived stream for a sub-task, stable w.r.t. call order elsewhere
  Rng fork(uint64_t stream) const {
    uint64_t s = seed_mix_ ^ (0x9e3779b97f4a7c15ull * (stream + 1));
    return Rng(s);
  }

  static Rng seeded(uint64_t seed) {
    Rng r(seed);
    r.seed_mix_ = seed;
    return r;
  }

 private:
  std::mt19937_64 eng_;
  uint64_t seed_mix_ = 0;
};

inline Rng make_rng(uint64_t seed) {
  Rng r(seed);
  return r;
}

// worker cap from LINECOUNTER_THREADS (also applied to BLAS); 0 = unset
int env_thread_cap();
void set_blas_threads(int n);
int blas_threads();

void gemm_f32(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
              int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_f64(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
              int lda, const double* b, int ldb, double beta, double* c, int ldc);

template <typename T>
inline void gemm(bool ta, bool tb, int m, int n, int k, T alpha, const T* a, int lda, const T* b,
                 int ldb, T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>)
    gemm_f32(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  else
    gemm_f64(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

}  // namespace lc
