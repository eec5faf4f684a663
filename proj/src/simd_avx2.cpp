// AVX2+FMA variants of the arithmetic kernels. This file is compiled with
// -mavx2 -mfma; callers go through the dispatch table which only routes here
// after __builtin_cpu_supports("avx2") and ("fma") both pass.

#include "simd_avx2.hpp"

#include <immintrin.h>

#include <cmath>

namespace ambc::simd::avx2 {

namespace {

inline float hsum8(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

}  // namespace

void sgemm_nn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  const int n16 = n & ~15;
  int i = 0;
  // 4 x 16 microkernel: 8 accumulators, broadcast A, two B vectors.
  for (; i + 4 <= m; i += 4) {
    const float* a0 = a + static_cast<std::size_t>(i) * k;
    const float* a1 = a0 + k;
    const float* a2 = a1 + k;
    const float* a3 = a2 + k;
    float* c0 = c + static_cast<std::size_t>(i) * n;
    float* c1 = c0 + n;
    float* c2 = c1 + n;
    float* c3 = c2 + n;
    for (int j = 0; j < n16; j += 16) {
      __m256 acc00, acc01, acc10, acc11, acc20, acc21, acc30, acc31;
      if (accumulate) {
        acc00 = _mm256_loadu_ps(c0 + j);
        acc01 = _mm256_loadu_ps(c0 + j + 8);
        acc10 = _mm256_loadu_ps(c1 + j);
        acc11 = _mm256_loadu_ps(c1 + j + 8);
        acc20 = _mm256_loadu_ps(c2 + j);
        acc21 = _mm256_loadu_ps(c2 + j + 8);
        acc30 = _mm256_loadu_ps(c3 + j);
        acc31 = _mm256_loadu_ps(c3 + j + 8);
      } else {
        acc00 = acc01 = acc10 = acc11 = _mm256_setzero_ps();
        acc20 = acc21 = acc30 = acc31 = _mm256_setzero_ps();
      }
      for (int p = 0; p < k; ++p) {
        const float* brow = b + static_cast<std::size_t>(p) * n + j;
        const __m256 b0 = _mm256_loadu_ps(brow);
        const __m256 b1 = _mm256_loadu_ps(brow + 8);
        const __m256 av0 = _mm256_broadcast_ss(a0 + p);
        const __m256 av1 = _mm256_broadcast_ss(a1 + p);
        const __m256 av2 = _mm256_broadcast_ss(a2 + p);
        const __m256 av3 = _mm256_broadcast_ss(a3 + p);
        acc00 = _mm256_fmadd_ps(av0, b0, acc00);
        acc01 = _mm256_fmadd_ps(av0, b1, acc01);
        acc10 = _mm256_fmadd_ps(av1, b0, acc10);
        acc11 = _mm256_fmadd_ps(av1, b1, acc11);
        acc20 = _mm256_fmadd_ps(av2, b0, acc20);
        acc21 = _mm256_fmadd_ps(av2, b1, acc21);
        acc30 = _mm256_fmadd_ps(av3, b0, acc30);
        acc31 = _mm256_fmadd_ps(av3, b1, acc31);
      }
      _mm256_storeu_ps(c0 + j, acc00);
      _mm256_storeu_ps(c0 + j + 8, acc01);
      _mm256_storeu_ps(c1 + j, acc10);
      _mm256_storeu_ps(c1 + j + 8, acc11);
      _mm256_storeu_ps(c2 + j, acc20);
      _mm256_storeu_ps(c2 + j + 8, acc21);
      _mm256_storeu_ps(c3 + j, acc30);
      _mm256_storeu_ps(c3 + j + 8, acc31);
    }
    for (int j = n16; j < n; ++j) {
      float s0 = accumulate ? c0[j] : 0.0f;
      float s1 = accumulate ? c1[j] : 0.0f;
      float s2 = accumulate ? c2[j] : 0.0f;
      float s3 = accumulate ? c3[j] : 0.0f;
      for (int p = 0; p < k; ++p) {
        const float bv = b[static_cast<std::size_t>(p) * n + j];
        s0 += a0[p] * bv;
        s1 += a1[p] * bv;
        s2 += a2[p] * bv;
        s3 += a3[p] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
      c2[j] = s2;
      c3[j] = s3;
    }
  }
  // remaining rows, one at a time
  for (; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * k;
    float* crow = c + static_cast<std::size_t>(i) * n;
    const int n8 = n & ~7;
    for (int j = 0; j < n8; j += 8) {
      __m256 acc = accumulate ? _mm256_loadu_ps(crow + j) : _mm256_setzero_ps();
      for (int p = 0; p < k; ++p) {
        const __m256 bv = _mm256_loadu_ps(b + static_cast<std::size_t>(p) * n + j);
        acc = _mm256_fmadd_ps(_mm256_broadcast_ss(arow + p), bv, acc);
      }
      _mm256_storeu_ps(crow + j, acc);
    }
    for (int j = n8; j < n; ++j) {
      float s = accumulate ? crow[j] : 0.0f;
      for (int p = 0; p < k; ++p) s += arow[p] * b[static_cast<std::size_t>(p) * n + j];
      crow[j] = s;
    }
  }
}

void sgemm_nt(const float* a, const float* b, float* c, int m, int n, int k,
              bool accumulate) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<std::size_t>(i) * n;
    float* crow = c + static_cast<std::size_t>(i) * k;
    int j = 0;
    for (; j + 4 <= k; j += 4) {
      const float* b0 = b + static_cast<std::size_t>(j) * n;
      const float* b1 = b0 + n;
      const float* b2 = b1 + n;
      const float* b3 = b2 + n;
      __m256 acc0 = _mm256_setzero_ps();
      __m256 acc1 = _mm256_setzero_ps();
      __m256 acc2 = _mm256_setzero_ps();
      __m256 acc3 = _mm256_setzero_ps();
      for (int p = 0; p < n8; p += 8) {
        const __m256 av = _mm256_loadu_ps(arow + p);
        acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b0 + p), acc0);
        acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b1 + p), acc1);
        acc2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b2 + p), acc2);
        acc3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(b3 + p), acc3);
      }
      float s0 = hsum8(acc0), s1 = hsum8(acc1), s2 = hsum8(acc2), s3 = hsum8(acc3);
      for (int p = n8; p < n; ++p) {
        const float av = arow[p];
        s0 += av * b0[p];
        s1 += av * b1[p];
        s2 += av * b2[p];
        s3 += av * b3[p];
      }
      if (accumulate) {
        crow[j] += s0;
        crow[j + 1] += s1;
        crow[j + 2] += s2;
        crow[j + 3] += s3;
      } else {
        crow[j] = s0;
        crow[j + 1] = s1;
        crow[j + 2] = s2;
        crow[j + 3] = s3;
      }
    }
    for (; j < k; ++j) {
      const float* brow = b + static_cast<std::size_t>(j) * n;
      __m256 acc = _mm256_setzero_ps();
      for (int p = 0; p < n8; p += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p), _mm256_loadu_ps(brow + p), acc);
      float s = hsum8(acc);
      for (int p = n8; p < n; ++p) s += arow[p] * brow[p];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void sgemm_tn(const float* a, const float* b, float* c, int m, int k, int n,
              bool accumulate) {
  if (!accumulate) {
    const std::size_t total = static_cast<std::size_t>(k) * n;
    std::size_t z = 0;
    const __m256 zero = _mm256_setzero_ps();
    for (; z + 8 <= total; z += 8) _mm256_storeu_ps(c + z, zero);
    for (; z < total; ++z) c[z] = 0.0f;
  }
  const int n8 = n & ~7;
  for (int p = 0; p < m; ++p) {
    const float* arow = a + static_cast<std::size_t>(p) * k;
    const float* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < k; ++i) {
      const __m256 av = _mm256_broadcast_ss(arow + i);
      float* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n8; j += 8) {
        const __m256 cv = _mm256_loadu_ps(crow + j);
        _mm256_storeu_ps(crow + j,
                         _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), cv));
      }
      const float afs = arow[i];
      for (int j = n8; j < n; ++j) crow[j] += afs * brow[j];
    }
  }
}

void relu_forward(const float* x, float* y, unsigned char* mask,
                  std::size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(y + i, _mm256_max_ps(xv, zero));
    const int bits = _mm256_movemask_ps(_mm256_cmp_ps(xv, zero, _CMP_GT_OQ));
    for (int l = 0; l < 8; ++l) mask[i + l] = static_cast<unsigned char>((bits >> l) & 1);
  }
  for (; i < n; ++i) {
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
  const __m256 b1 = _mm256_set1_ps(beta1);
  const __m256 b2 = _mm256_set1_ps(beta2);
  const __m256 ob1 = _mm256_set1_ps(1.0f - beta1);
  const __m256 ob2 = _mm256_set1_ps(1.0f - beta2);
  const __m256 lrv = _mm256_set1_ps(lr);
  const __m256 epsv = _mm256_set1_ps(eps);
  const __m256 c1 = _mm256_set1_ps(bias_c1);
  const __m256 c2 = _mm256_set1_ps(bias_c2);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    __m256 mv = _mm256_loadu_ps(m + i);
    __m256 vv = _mm256_loadu_ps(v + i);
    mv = _mm256_add_ps(_mm256_mul_ps(b1, mv), _mm256_mul_ps(ob1, g));
    vv = _mm256_add_ps(_mm256_mul_ps(b2, vv),
                       _mm256_mul_ps(ob2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mv);
    _mm256_storeu_ps(v + i, vv);
    const __m256 mhat = _mm256_mul_ps(mv, c1);
    const __m256 vhat = _mm256_mul_ps(vv, c2);
    const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
    const __m256 upd = _mm256_div_ps(_mm256_mul_ps(lrv, mhat), denom);
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), upd));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    m[i] = beta1 * m[i] + (1.0f - beta1) * g;
    v[i] = beta2 * v[i] + (1.0f - beta2) * (g * g);
    param[i] -= lr * (m[i] * bias_c1) / (std::sqrt(v[i] * bias_c2) + eps);
  }
}

float sum_f32(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum8(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

float sumsq_f32(const float* x, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    acc = _mm256_fmadd_ps(xv, xv, acc);
  }
  float s = hsum8(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double sumsq_f64(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(xv, xv, acc);
  }
  double s = hsum4(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

std::complex<double> cdotc(const std::complex<double>* a,
                           const std::complex<double>* b, std::size_t n) {
  // Two interleaved complexes per vector; accumulate re/im lanes, signed
  // shuffle handles the conjugate.
  const __m256d sign = _mm256_set_pd(1.0, -1.0, 1.0, -1.0);
  __m256d re_acc = _mm256_setzero_pd();
  __m256d im_acc = _mm256_setzero_pd();
  const double* ap = reinterpret_cast<const double*>(a);
  const double* bp = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d av = _mm256_loadu_pd(ap + 2 * i);
    const __m256d bv = _mm256_loadu_pd(bp + 2 * i);
    re_acc = _mm256_fmadd_pd(av, bv, re_acc);  // ar*br, ai*bi per lane
    const __m256d aswap = _mm256_permute_pd(av, 0x5);  // [ai, ar, ...]
    im_acc = _mm256_fmadd_pd(_mm256_mul_pd(aswap, sign), bv, im_acc);
    // lanes: -ai*br, ar*bi per pair
  }
  double re = hsum4(re_acc);
  double im = hsum4(im_acc);
  for (; i < n; ++i) {
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
  const __m256d sign = _mm256_set_pd(1.0, -1.0, 1.0, -1.0);
  const double* wp = reinterpret_cast<const double*>(w);
  double acc = 0.0;
  for (std::size_t k = 0; k < k_rows; ++k) {
    const double* row = reinterpret_cast<const double*>(x + k * m);
    __m256d re_acc = _mm256_setzero_pd();
    __m256d im_acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
      const __m256d wv = _mm256_loadu_pd(wp + 2 * i);
      const __m256d xv = _mm256_loadu_pd(row + 2 * i);
      re_acc = _mm256_fmadd_pd(wv, xv, re_acc);
      const __m256d wswap = _mm256_permute_pd(wv, 0x5);
      im_acc = _mm256_fmadd_pd(_mm256_mul_pd(wswap, sign), xv, im_acc);
    }
    double re = hsum4(re_acc);
    double im = hsum4(im_acc);
    for (; i < m; ++i) {
      const double wr = w[i].real(), wi = w[i].imag();
      const double xr = x[k * m + i].real(), xi = x[k * m + i].imag();
      re += wr * xr + wi * xi;
      im += wr * xi - wi * xr;
    }
    acc += re * re + im * im;
  }
  return acc;
}

void caxpy(std::complex<double>* y, const std::complex<double>* x,
           std::complex<double> s, std::size_t n) {
  const __m256d srv = _mm256_set1_pd(s.real());
  const __m256d siv = _mm256_set_pd(s.imag(), -s.imag(), s.imag(), -s.imag());
  double* yp = reinterpret_cast<double*>(y);
  const double* xp = reinterpret_cast<const double*>(x);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const __m256d xv = _mm256_loadu_pd(xp + 2 * i);
    const __m256d xswap = _mm256_permute_pd(xv, 0x5);  // [xi, xr, ...]
    __m256d yv = _mm256_loadu_pd(yp + 2 * i);
    yv = _mm256_fmadd_pd(srv, xv, yv);
    yv = _mm256_fmadd_pd(siv, xswap, yv);  // [-si*xi, si*xr] per pair
    _mm256_storeu_pd(yp + 2 * i, yv);
  }
  for (; i < n; ++i) {
    const double xr = x[i].real(), xi = x[i].imag();
    y[i] += std::complex<double>(s.real() * xr - s.imag() * xi,
                                 s.real() * xi + s.imag() * xr);
  }
}

}  // namespace ambc::simd::avx2
