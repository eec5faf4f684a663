#pragma once

// AVX2+FMA kernel variants. Declarations only; the definitions live in a
// translation unit compiled with -mavx2 -mfma and must only be called after
// a runtime CPU check.

#include <complex>
#include <cstddef>

namespace ambc::simd::avx2 {

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

}  // namespace ambc::simd::avx2
