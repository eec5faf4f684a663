#pragma once

// Runtime-dispatched arithmetic kernels. Every kernel has a scalar reference
// implementation (namespace simd::scalar); on x86 an AVX2+FMA variant is
// compiled in and selected at startup when the CPU supports it. The active
// backend can be forced with set_backend() or the AMBC_SIMD environment
// variable ("scalar" or "avx2"). Scalar and vector variants are
// equivalence-tested against each other.

#include <complex>
#include <cstddef>
#include <string>

namespace ambc::simd {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
bool backend_supported(Backend b);
void set_backend(Backend b);  // throws if unsupported on this CPU/build
const char* backend_name(Backend b);

// ---- float32 kernels (NN engine) ------------------------------------------

// C[m x n] (+)= A[m x k] * B[k x n], all row-major.
void sgemm_nn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate);

// C[m x k] (+)= A[m x n] * B^T where B is [k x n] row-major (row-row dots).
void sgemm_nt(const float* a, const float* b, float* c, int m, int n, int k,
              bool accumulate);

// C[k x n] (+)= A^T * B with A [m x k], B [m x n], both row-major.
void sgemm_tn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate);

// y = max(x, 0); mask[i] = 1 if x[i] > 0 else 0.
void relu_forward(const float* x, float* y, unsigned char* mask, std::size_t n);

// gx[i] += gy[i] * mask[i] (mask from relu_forward).
void relu_backward(const float* gy, const unsigned char* mask, float* gx,
                   std::size_t n);

// Bias-corrected Adam update over a flat parameter block. Elementwise,
// identical results on every backend.
void adam_update(float* param, const float* grad, float* m, float* v,
                 std::size_t n, float lr, float beta1, float beta2, float eps,
                 float bias_c1, float bias_c2);

float sum_f32(const float* x, std::size_t n);
float sumsq_f32(const float* x, std::size_t n);

// ---- float64 / complex kernels (detectors) ---------------------------------

double sumsq_f64(const double* x, std::size_t n);

// sum_i conj(a_i) * b_i
std::complex<double> cdotc(const std::complex<double>* a,
                           const std::complex<double>* b, std::size_t n);

// sum_k | w^H x_k |^2 over the K rows of X (row-major K x M). The inner
// quadratic form of the Gaussian LRT in Sherman-Morrison form.
double cdotc_rows_normsq(const std::complex<double>* x,
                         const std::complex<double>* w, std::size_t k_rows,
                         std::size_t m);

// y_i += s * x_i
void caxpy(std::complex<double>* y, const std::complex<double>* x,
           std::complex<double> s, std::size_t n);

// Scalar reference implementations, always available (oracles for the
// dispatch equivalence tests).
namespace scalar {
void sgemm_nn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate);
void sgemm_nt(const float* a, const float* b, float* c, int m, int n, int k,
              bool accumulate);
void sgemm_tn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate);
void relu_forward(const float* x, float* y, unsigned char* mask, std::size_t n);
void relu_backward(const float* gy, const unsigned char* mask, float* gx,
                   std::size_t n);
void adam_update(float* param, const float* grad, float* m, float* v,
                 std::size_t n, float lr, float beta1, float beta2, float eps,
                 float bias_c1, float bias_c2);
float sum_f32(const float* x, std::size_t n);
float sumsq_f32(const float* x, std::size_t n);
double sumsq_f64(const double* x, std::size_t n);
std::complex<double> cdotc(const std::complex<double>* a,
                           const std::complex<double>* b, std::size_t n);
double cdotc_rows_normsq(const std::complex<double>* x,
                         const std::complex<double>* w, std::size_t k_rows,
                         std::size_t m);
void caxpy(std::complex<double>* y, const std::complex<double>* x,
           std::complex<double> s, std::size_t n);
}  // namespace scalar

}  // namespace ambc::simd
