#pragma once

// Layer zoo for the two network architectures: Conv2d (3x3, stride 1,
// pad 1, no bias), BatchNorm2d, ReLU, AdaptiveAvgPool2d and Linear, each
// with a hand-written backward pass. Layers save what backward needs during
// a recorded forward; calling backward without one is a usage error.
//
// Everything is templated on the scalar type. The float instantiation routes
// its inner GEMMs through the dispatched SIMD kernels; other types fall back
// to the scalar reference, which is what the float64 gradient-check replays
// use.

#include <cmath>
#include <limits>
#include <vector>

#include "ambc/nn/tensor.hpp"
#include "ambc/simd.hpp"

namespace ambc::nn {

namespace detail {

template <class T>
void gemm_nn(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<std::size_t>(i) * n;
    if (!acc)
      for (int j = 0; j < n; ++j) crow[j] = T{};
    for (int p = 0; p < k; ++p) {
      const T av = a[static_cast<std::size_t>(i) * k + p];
      const T* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}
template <>
inline void gemm_nn<float>(const float* a, const float* b, float* c, int m,
                           int k, int n, bool acc) {
  simd::sgemm_nn(a, b, c, m, k, n, acc);
}

template <class T>
void gemm_nt(const T* a, const T* b, T* c, int m, int n, int k, bool acc) {
  for (int i = 0; i < m; ++i) {
    const T* arow = a + static_cast<std::size_t>(i) * n;
    T* crow = c + static_cast<std::size_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const T* brow = b + static_cast<std::size_t>(j) * n;
      T accv{};
      for (int p = 0; p < n; ++p) accv += arow[p] * brow[p];
      crow[j] = acc ? crow[j] + accv : accv;
    }
  }
}
template <>
inline void gemm_nt<float>(const float* a, const float* b, float* c, int m,
                           int n, int k, bool acc) {
  simd::sgemm_nt(a, b, c, m, n, k, acc);
}

template <class T>
void gemm_tn(const T* a, const T* b, T* c, int m, int k, int n, bool acc) {
  if (!acc)
    for (std::size_t i = 0; i < static_cast<std::size_t>(k) * n; ++i) c[i] = T{};
  for (int p = 0; p < m; ++p) {
    const T* arow = a + static_cast<std::size_t>(p) * k;
    const T* brow = b + static_cast<std::size_t>(p) * n;
    for (int i = 0; i < k; ++i) {
      const T av = arow[i];
      T* crow = c + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}
template <>
inline void gemm_tn<float>(const float* a, const float* b, float* c, int m,
                           int k, int n, bool acc) {
  simd::sgemm_tn(a, b, c, m, k, n, acc);
}

/// Uniform init in +-sqrt(1/fan_in), the standard fan-in scheme.
template <class T>
void fan_in_uniform(std::vector<T>& w, int fan_in, RngStream& rng) {
  const double s = std::sqrt(1.0 / fan_in);
  for (auto& x : w) x = static_cast<T>((rng.next_double() * 2.0 - 1.0) * s);
}

}  // namespace detail

// ---------------------------------------------------------------------------

template <class T>
struct Conv2d {
  int in_ch = 0, out_ch = 0;
  std::vector<T> weight;  // [out][in][3][3]
  std::vector<T> wgrad;

  Conv2d() = default;
  Conv2d(int in, int out) : in_ch(in), out_ch(out) {
    weight.assign(static_cast<std::size_t>(out) * in * 9, T{});
    wgrad.assign(weight.size(), T{});
  }

  void init(RngStream& rng) { detail::fan_in_uniform(weight, in_ch * 9, rng); }
  void zero_grad() { std::fill(wgrad.begin(), wgrad.end(), T{}); }

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != in_ch) throw ConfigError("Conv2d: channel mismatch");
    if (h < 1 || w < 1) throw ConfigError("Conv2d: empty spatial dims");
    b_ = b;
    h_ = h;
    w_ = w;
    im2col(x);
    const int hw = h * w;
    const int bhw = b * hw;
    // flat output [out][b*hw], then scatter to [b][out][h][w]
    std::vector<T> yflat(static_cast<std::size_t>(out_ch) * bhw);
    detail::gemm_nn<T>(weight.data(), cols_.data(), yflat.data(), out_ch,
                       in_ch * 9, bhw, false);
    TensorT<T> y({b, out_ch, h, w});
    for (int bb = 0; bb < b; ++bb)
      for (int o = 0; o < out_ch; ++o)
        std::copy_n(yflat.data() + static_cast<std::size_t>(o) * bhw +
                        static_cast<std::size_t>(bb) * hw,
                    hw,
                    y.p() + (static_cast<std::size_t>(bb) * out_ch + o) * hw);
    saved_ = record;
    if (!record) cols_.clear();
    AMBC_CHECK_FINITE(y.data);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    if (!saved_) throw UsageError("Conv2d::backward before recorded forward");
    const int b = b_, h = h_, w = w_;
    const int hw = h * w, bhw = b * hw;
    // gather upstream grad into [out][b*hw]
    std::vector<T> gflat(static_cast<std::size_t>(out_ch) * bhw);
    for (int bb = 0; bb < b; ++bb)
      for (int o = 0; o < out_ch; ++o)
        std::copy_n(gy.p() + (static_cast<std::size_t>(bb) * out_ch + o) * hw,
                    hw,
                    gflat.data() + static_cast<std::size_t>(o) * bhw +
                        static_cast<std::size_t>(bb) * hw);
    // dW += gflat * cols^T
    detail::gemm_nt<T>(gflat.data(), cols_.data(), wgrad.data(), out_ch, bhw,
                       in_ch * 9, true);
    // dcols = W^T * gflat
    std::vector<T> dcols(cols_.size());
    detail::gemm_tn<T>(weight.data(), gflat.data(), dcols.data(), out_ch,
                       in_ch * 9, bhw, false);
    TensorT<T> gx({b, in_ch, h, w});
    col2im(dcols, gx);
    AMBC_CHECK_FINITE(gx.data);
    return gx;
  }

 private:
  int b_ = 0, h_ = 0, w_ = 0;
  bool saved_ = false;
  std::vector<T> cols_;  // [in*9][b*h*w]

  void im2col(const TensorT<T>& x) {
    const int b = b_, h = h_, w = w_, hw = h * w;
    const std::size_t bhw = static_cast<std::size_t>(b) * hw;
    cols_.assign(static_cast<std::size_t>(in_ch) * 9 * bhw, T{});
    for (int r = 0; r < in_ch; ++r) {
      for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 3; ++v) {
          T* dst_base = cols_.data() + (static_cast<std::size_t>(r) * 9 + u * 3 + v) * bhw;
          const int j0 = std::max(0, 1 - v);            // valid output columns
          const int j1 = std::min(w, w + 1 - v);
          for (int bb = 0; bb < b; ++bb) {
            const T* src_ch =
                x.p() + (static_cast<std::size_t>(bb) * in_ch + r) * hw;
            for (int i = 0; i < h; ++i) {
              const int si = i + u - 1;
              if (si < 0 || si >= h) continue;
              T* dst = dst_base + static_cast<std::size_t>(bb) * hw +
                       static_cast<std::size_t>(i) * w;
              const T* src = src_ch + static_cast<std::size_t>(si) * w + (v - 1);
              for (int j = j0; j < j1; ++j) dst[j] = src[j];
            }
          }
        }
      }
    }
  }

  void col2im(const std::vector<T>& dcols, TensorT<T>& gx) const {
    const int b = b_, h = h_, w = w_, hw = h * w;
    const std::size_t bhw = static_cast<std::size_t>(b) * hw;
    for (int r = 0; r < in_ch; ++r) {
      for (int u = 0; u < 3; ++u) {
        for (int v = 0; v < 3; ++v) {
          const T* src_base =
              dcols.data() + (static_cast<std::size_t>(r) * 9 + u * 3 + v) * bhw;
          const int j0 = std::max(0, 1 - v);
          const int j1 = std::min(w, w + 1 - v);
          for (int bb = 0; bb < b; ++bb) {
            T* dst_ch = gx.p() + (static_cast<std::size_t>(bb) * in_ch + r) * hw;
            for (int i = 0; i < h; ++i) {
              const int si = i + u - 1;
              if (si < 0 || si >= h) continue;
              const T* src = src_base + static_cast<std::size_t>(bb) * hw +
                             static_cast<std::size_t>(i) * w;
              T* dst = dst_ch + static_cast<std::size_t>(si) * w + (v - 1);
              for (int j = j0; j < j1; ++j) dst[j] += src[j];
            }
          }
        }
      }
    }
  }
};

// ---------------------------------------------------------------------------

template <class T>
struct BatchNorm2d {
  int ch = 0;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
  std::vector<T> gamma, beta, ggrad, bgrad;
  std::vector<T> running_mean, running_var;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels) : ch(channels) {
    gamma.assign(ch, T{1});
    beta.assign(ch, T{});
    ggrad.assign(ch, T{});
    bgrad.assign(ch, T{});
    running_mean.assign(ch, T{});
    running_var.assign(ch, T{1});
  }

  void zero_grad() {
    std::fill(ggrad.begin(), ggrad.end(), T{});
    std::fill(bgrad.begin(), bgrad.end(), T{});
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (c != ch) throw ConfigError("BatchNorm2d: channel mismatch");
    const int hw = h * w;
    const long n = static_cast<long>(b) * hw;
    TensorT<T> y({b, c, h, w});
    if (!train) {
      for (int cc = 0; cc < c; ++cc) {
        const T scale = gamma[cc] / std::sqrt(running_var[cc] + eps);
        const T shift = beta[cc] - running_mean[cc] * scale;
        for (int bb = 0; bb < b; ++bb) {
          const T* xs = x.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
          T* ys = y.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
          for (int i = 0; i < hw; ++i) ys[i] = xs[i] * scale + shift;
        }
      }
      saved_ = false;
      return y;
    }
    if (n < 2) throw ConfigError("BatchNorm2d: training needs n >= 2 per channel");
    b_ = b;
    h_ = h;
    w_ = w;
    xhat_.assign(x.data.size(), T{});
    inv_std_.assign(c, T{});
    for (int cc = 0; cc < c; ++cc) {
      // two-pass batch statistics over (batch, spatial)
      T mean{};
      for (int bb = 0; bb < b; ++bb) {
        const T* xs = x.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        for (int i = 0; i < hw; ++i) mean += xs[i];
      }
      mean /= static_cast<T>(n);
      T var{};
      for (int bb = 0; bb < b; ++bb) {
        const T* xs = x.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        for (int i = 0; i < hw; ++i) {
          const T d = xs[i] - mean;
          var += d * d;
        }
      }
      var /= static_cast<T>(n);
      const T istd = T{1} / std::sqrt(var + eps);
      inv_std_[cc] = istd;
      for (int bb = 0; bb < b; ++bb) {
        const T* xs = x.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        T* xh = xhat_.data() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        T* ys = y.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        for (int i = 0; i < hw; ++i) {
          xh[i] = (xs[i] - mean) * istd;
          ys[i] = gamma[cc] * xh[i] + beta[cc];
        }
      }
      running_mean[cc] = (T{1} - momentum) * running_mean[cc] + momentum * mean;
      const T unbiased = var * static_cast<T>(n) / static_cast<T>(n - 1);
      running_var[cc] = (T{1} - momentum) * running_var[cc] + momentum * unbiased;
    }
    saved_ = true;
    AMBC_CHECK_FINITE(y.data);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    if (!saved_) throw UsageError("BatchNorm2d::backward before training forward");
    const int b = b_, c = ch, h = h_, w = w_;
    const int hw = h * w;
    const long n = static_cast<long>(b) * hw;
    TensorT<T> gx({b, c, h, w});
    for (int cc = 0; cc < c; ++cc) {
      T sum_gy{}, sum_gy_xhat{};
      for (int bb = 0; bb < b; ++bb) {
        const T* gs = gy.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        const T* xh = xhat_.data() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        for (int i = 0; i < hw; ++i) {
          sum_gy += gs[i];
          sum_gy_xhat += gs[i] * xh[i];
        }
      }
      ggrad[cc] += sum_gy_xhat;
      bgrad[cc] += sum_gy;
      const T scale = gamma[cc] * inv_std_[cc] / static_cast<T>(n);
      for (int bb = 0; bb < b; ++bb) {
        const T* gs = gy.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        const T* xh = xhat_.data() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        T* gxs = gx.p() + (static_cast<std::size_t>(bb) * c + cc) * hw;
        for (int i = 0; i < hw; ++i)
          gxs[i] = scale * (static_cast<T>(n) * gs[i] - sum_gy - xh[i] * sum_gy_xhat);
      }
    }
    AMBC_CHECK_FINITE(gx.data);
    return gx;
  }

 private:
  int b_ = 0, h_ = 0, w_ = 0;
  bool saved_ = false;
  std::vector<T> xhat_;
  std::vector<T> inv_std_;
};

// ---------------------------------------------------------------------------

template <class T>
struct ReLU {
  TensorT<T> forward(const TensorT<T>& x, bool record) {
    TensorT<T> y(x.shape);
    mask_.assign(x.data.size(), 0);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      const bool pos = x.data[i] > T{};
      y.data[i] = pos ? x.data[i] : T{};
      mask_[i] = pos ? 1 : 0;
    }
    saved_ = record;
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    if (!saved_) throw UsageError("ReLU::backward before recorded forward");
    TensorT<T> gx(gy.shape);
    for (std::size_t i = 0; i < gy.data.size(); ++i)
      gx.data[i] = mask_[i] ? gy.data[i] : T{};
    return gx;
  }

 private:
  bool saved_ = false;
  std::vector<unsigned char> mask_;
};

template <>
inline TensorT<float> ReLU<float>::forward(const TensorT<float>& x, bool record) {
  TensorT<float> y(x.shape);
  mask_.assign(x.data.size(), 0);
  simd::relu_forward(x.p(), y.p(), mask_.data(), x.data.size());
  saved_ = record;
  return y;
}

template <>
inline TensorT<float> ReLU<float>::backward(const TensorT<float>& gy) {
  if (!saved_) throw UsageError("ReLU::backward before recorded forward");
  TensorT<float> gx(gy.shape);
  simd::relu_backward(gy.p(), mask_.data(), gx.p(), gy.data.size());
  return gx;
}

// ---------------------------------------------------------------------------

/// Adaptive average pooling: output bin (i, j) averages input rows
/// floor(i*H/out_h) .. ceil((i+1)*H/out_h)-1 and likewise for columns.
/// Identity when the input already has the target size; smaller inputs get
/// rows/columns replicated by the same bin formula.
template <class T>
struct AdaptiveAvgPool2d {
  int out_h = 0, out_w = 0;

  AdaptiveAvgPool2d() = default;
  AdaptiveAvgPool2d(int oh, int ow) : out_h(oh), out_w(ow) {
    if (oh < 1 || ow < 1) throw ConfigError("AdaptiveAvgPool2d: bad target");
  }

  static int bin_lo(int i, int in, int out) {
    return static_cast<int>((static_cast<long>(i) * in) / out);
  }
  static int bin_hi(int i, int in, int out) {
    return static_cast<int>((static_cast<long>(i + 1) * in + out - 1) / out);
  }

  TensorT<T> forward(const TensorT<T>& x, bool record) {
    const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_h_ = h;
    in_w_ = w;
    b_ = b;
    c_ = c;
    saved_ = record;
    TensorT<T> y({b, c, out_h, out_w});
    for (int bb = 0; bb < b; ++bb) {
      for (int cc = 0; cc < c; ++cc) {
        const T* xs = x.p() + (static_cast<std::size_t>(bb) * c + cc) *
                                  static_cast<std::size_t>(h) * w;
        T* ys = y.p() + (static_cast<std::size_t>(bb) * c + cc) *
                            static_cast<std::size_t>(out_h) * out_w;
        for (int i = 0; i < out_h; ++i) {
          const int r0 = bin_lo(i, h, out_h), r1 = bin_hi(i, h, out_h);
          for (int j = 0; j < out_w; ++j) {
            const int c0 = bin_lo(j, w, out_w), c1 = bin_hi(j, w, out_w);
            T acc{};
            for (int r = r0; r < r1; ++r)
              for (int cidx = c0; cidx < c1; ++cidx)
                acc += xs[static_cast<std::size_t>(r) * w + cidx];
            ys[static_cast<std::size_t>(i) * out_w + j] =
                acc / static_cast<T>((r1 - r0) * (c1 - c0));
          }
        }
      }
    }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    if (!saved_) throw UsageError("AdaptiveAvgPool2d::backward before forward");
    const int b = b_, c = c_, h = in_h_, w = in_w_;
    TensorT<T> gx({b, c, h, w});
    for (int bb = 0; bb < b; ++bb) {
      for (int cc = 0; cc < c; ++cc) {
        T* gxs = gx.p() + (static_cast<std::size_t>(bb) * c + cc) *
                              static_cast<std::size_t>(h) * w;
        const T* gys = gy.p() + (static_cast<std::size_t>(bb) * c + cc) *
                                    static_cast<std::size_t>(out_h) * out_w;
        for (int i = 0; i < out_h; ++i) {
          const int r0 = bin_lo(i, h, out_h), r1 = bin_hi(i, h, out_h);
          for (int j = 0; j < out_w; ++j) {
            const int c0 = bin_lo(j, w, out_w), c1 = bin_hi(j, w, out_w);
            const T share = gys[static_cast<std::size_t>(i) * out_w + j] /
                            static_cast<T>((r1 - r0) * (c1 - c0));
            for (int r = r0; r < r1; ++r)
              for (int cidx = c0; cidx < c1; ++cidx)
                gxs[static_cast<std::size_t>(r) * w + cidx] += share;
          }
        }
      }
    }
    return gx;
  }

 private:
  int b_ = 0, c_ = 0, in_h_ = 0, in_w_ = 0;
  bool saved_ = false;
};

// ---------------------------------------------------------------------------

template <class T>
struct Linear {
  int in_f = 0, out_f = 0;
  std::vector<T> weight;  // [out][in]
  std::vector<T> bias;    // [out]
  std::vector<T> wgrad, bgrad;

  Linear() = default;
  Linear(int in, int out) : in_f(in), out_f(out) {
    weight.assign(static_cast<std::size_t>(out) * in, T{});
    bias.assign(out, T{});
    wgrad.assign(weight.size(), T{});
    bgrad.assign(bias.size(), T{});
  }

  void init(RngStream& rng) { detail::fan_in_uniform(weight, in_f, rng); }
  void zero_grad() {
    std::fill(wgrad.begin(), wgrad.end(), T{});
    std::fill(bgrad.begin(), bgrad.end(), T{});
  }

  /// x: [B, in] (trailing axes flattened) -> [B, out]
  TensorT<T> forward(const TensorT<T>& x, bool record) {
    const int b = x.dim(0);
    if (x.numel() != static_cast<long>(b) * in_f)
      throw ConfigError("Linear: input size mismatch");
    if (record) {
      xsaved_ = x.data;
      b_ = b;
      saved_ = true;
    } else {
      saved_ = false;
    }
    TensorT<T> y({b, out_f});
    detail::gemm_nt<T>(x.p(), weight.data(), y.p(), b, in_f, out_f, false);
    for (int bb = 0; bb < b; ++bb) {
      T* ys = y.p() + static_cast<std::size_t>(bb) * out_f;
      for (int o = 0; o < out_f; ++o) ys[o] += bias[o];
    }
    AMBC_CHECK_FINITE(y.data);
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    if (!saved_) throw UsageError("Linear::backward before recorded forward");
    const int b = b_;
    // dW += gy^T x ; db += column sums ; dx = gy W
    detail::gemm_tn<T>(gy.p(), xsaved_.data(), wgrad.data(), b, out_f, in_f,
                       true);
    for (int bb = 0; bb < b; ++bb) {
      const T* gs = gy.p() + static_cast<std::size_t>(bb) * out_f;
      for (int o = 0; o < out_f; ++o) bgrad[o] += gs[o];
    }
    TensorT<T> gx({b, in_f});
    detail::gemm_nn<T>(gy.p(), weight.data(), gx.p(), b, out_f, in_f, false);
    AMBC_CHECK_FINITE(gx.data);
    return gx;
  }

 private:
  std::vector<T> xsaved_;
  int b_ = 0;
  bool saved_ = false;
};

}  // namespace ambc::nn
