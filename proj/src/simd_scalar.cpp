#include <cmath>

#include "ambc/simd.hpp"

// Reference kernels. Plain loops in a fixed order; these define the
// semantics the vector variants are tested against.

namespace ambc::simd::scalar {

void sgemm_nn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    for (int p = 0; p < k; ++p) {
      const float av = a[static_cast<std::size_t>(i) * k + p];
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void sgemm_nt(const float* a, const float* b, float* c, int m, int n, int k,
              bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * n;
    float* crow = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * n;
      float acc = 0.0f;
      for (int p = 0; p < n; ++p) acc += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + acc : acc;
    }
  }
}

void sgemm_tn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(k) * n; ++i) c[i] = 0.0f;
  }
  for (int p = 0; p < m; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * k;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < k; ++i) {
      const float av = arow[i];
      float* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void relu_forward(const float* x, float* y, unsigned char* mask,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = x[i] > 0.0f;
    y[i] = pos ? x[i] : 0.0f;
    mask[i] = pos ? 1 : 0;
  }
}

void relu_backward(const float* gy, const unsigned char* mask, float* gx,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) gx[i] += mask[i] ? gy[i] : 0.0f;
}

void adam_update(float* param, const float* grad, float* m, float* v,
                 std::size_t n, float lr, float beta1, float beta2, float eps,
                 float bias_c1, float bias_c2) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * (g * g);
    const float mhat = m[i] * bias_c1;
    const float vhat = v[i] * bias_c2;
    param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

float sum_f32(const float* x, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

float sumsq_f32(const float* x, std::size_t n) {
  float s = 0.0f;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sumsq_f64(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

std::complex<double> cdotc(const std::complex<double>* a,
                           const std::complex<double>* b, std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

double cdotc_rows_normsq(const std::complex<double>* x,
                         const std::complex<double>* w, std::size_t k_rows,
                         std::size_t m) {
  double acc = 0.0;
  for (std::size_t k = 0; k < k_rows; ++k) {
    const std::complex<double>* row = x + k * m;
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double wr = w[i].real(), wi = w[i].imag();
      const double xr = row[i].real(), xi = row[i].imag();
      re += wr * xr + wi * xi;
      im += wr * xi - wi * xr;
    }
    acc += re * re + im * im;
  }
  return acc;
}

void caxpy(std::complex<double>* y, const std::complex<double>* x,
           std::complex<double> s, std::size_t n) {
  const double sr = s.real(), si = s.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += std::complex<double>(sr * xr - si * xi, sr * xi + si * xr);
  }
}

}  // namespace ambc::simd::scalar
