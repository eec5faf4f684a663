#include "ambc/simd.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#ifdef AMBC_HAVE_AVX2
#include "simd_avx2.hpp"
#endif

namespace ambc::simd {

namespace {

struct Ops {
  decltype(&scalar::sgemm_nn) sgemm_nn;
  decltype(&scalar::sgemm_nt) sgemm_nt;
  decltype(&scalar::sgemm_tn) sgemm_tn;
  decltype(&scalar::relu_forward) relu_forward;
  decltype(&scalar::relu_backward) relu_backward;
  decltype(&scalar::adam_update) adam_update;
  decltype(&scalar::sum_f32) sum_f32;
  decltype(&scalar::sumsq_f32) sumsq_f32;
  decltype(&scalar::sumsq_f64) sumsq_f64;
  decltype(&scalar::cdotc) cdotc;
  decltype(&scalar::cdotc_rows_normsq) cdotc_rows_normsq;
  decltype(&scalar::caxpy) caxpy;
};

constexpr Ops kScalarOps = {
    &scalar::sgemm_nn, &scalar::sgemm_nt,   &scalar::sgemm_tn,
    &scalar::relu_forward, &scalar::relu_backward, &scalar::adam_update,
    &scalar::sum_f32,  &scalar::sumsq_f32,  &scalar::sumsq_f64,
    &scalar::cdotc,    &scalar::cdotc_rows_normsq, &scalar::caxpy,
};

#ifdef AMBC_HAVE_AVX2
constexpr Ops kAvx2Ops = {
    &avx2::sgemm_nn, &avx2::sgemm_nt,   &avx2::sgemm_tn,
    &avx2::relu_forward, &avx2::relu_backward, &avx2::adam_update,
    &avx2::sum_f32,  &avx2::sumsq_f32,  &avx2::sumsq_f64,
    &avx2::cdotc,    &avx2::cdotc_rows_normsq, &avx2::caxpy,
};

bool cpu_has_avx2() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

struct State {
  Backend backend;
  const Ops* ops;
};

State initial_state() {
  Backend b = Backend::Scalar;
#ifdef AMBC_HAVE_AVX2
  if (cpu_has_avx2()) b = Backend::Avx2;
#endif
  if (const char* env = std::getenv("AMBC_SIMD")) {
    const std::string v(env);
    if (v == "scalar") {
      b = Backend::Scalar;
    } else if (v == "avx2") {
      if (!backend_supported(Backend::Avx2))
        throw std::runtime_error("AMBC_SIMD=avx2 requested but AVX2 unavailable");
      b = Backend::Avx2;
    } else if (!v.empty()) {
      throw std::runtime_error("AMBC_SIMD must be 'scalar' or 'avx2', got '" + v + "'");
    }
  }
#ifdef AMBC_HAVE_AVX2
  return {b, b == Backend::Avx2 ? &kAvx2Ops : &kScalarOps};
#else
  return {b, &kScalarOps};
#endif
}

State& state() {
  static State s = initial_state();
  return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

bool backend_supported(Backend b) {
  if (b == Backend::Scalar) return true;
#ifdef AMBC_HAVE_AVX2
  return cpu_has_avx2();
#else
  (void)b;
  return false;
#endif
}

void set_backend(Backend b) {
  if (!backend_supported(b))
    throw std::runtime_error(std::string("SIMD backend not supported here: ") +
                             backend_name(b));
#ifdef AMBC_HAVE_AVX2
  state() = {b, b == Backend::Avx2 ? &kAvx2Ops : &kScalarOps};
#else
  state() = {b, &kScalarOps};
#endif
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "?";
}

void sgemm_nn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  state().ops->sgemm_nn(a, b, c, m, k, n, accumulate);
}
void sgemm_nt(const float* a, const float* b, float* c, int m, int n, int k,
              bool accumulate) {
  state().ops->sgemm_nt(a, b, c, m, n, k, accumulate);
}
void sgemm_tn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  state().ops->sgemm_tn(a, b, c, m, k, n, accumulate);
}
void relu_forward(const float* x, float* y, unsigned char* mask,
                  std::size_t n) {
  state().ops->relu_forward(x, y, mask, n);
}
void relu_backward(const float* gy, const unsigned char* mask, float* gx,
                   std::size_t n) {
  state().ops->relu_backward(gy, mask, gx, n);
}
void adam_update(float* param, const float* grad, float* m, float* v,
                 std::size_t n, float lr, float beta1, float beta2, float eps,
                 float bias_c1, float bias_c2) {
  state().ops->adam_update(param, grad, m, v, n, lr, beta1, beta2, eps,
                           bias_c1, bias_c2);
}
float sum_f32(const float* x, std::size_t n) { return state().ops->sum_f32(x, n); }
float sumsq_f32(const float* x, std::size_t n) { return state().ops->sumsq_f32(x, n); }
double sumsq_f64(const double* x, std::size_t n) { return state().ops->sumsq_f64(x, n); }
std::complex<double> cdotc(const std::complex<double>* a,
                           const std::complex<double>* b, std::size_t n) {
  return state().ops->cdotc(a, b, n);
}
double cdotc_rows_normsq(const std::complex<double>* x,
                         const std::complex<double>* w, std::size_t k_rows,
                         std::size_t m) {
  return state().ops->cdotc_rows_normsq(x, w, k_rows, m);
}
void caxpy(std::complex<double>* y, const std::complex<double>* x,
           std::complex<double> s, std::size_t n) {
  state().ops->caxpy(y, x, s, n);
}

}  // namespace ambc::simd
