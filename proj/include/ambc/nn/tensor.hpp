#pragma once

// Dense multi-dimensional array with an optional gradient buffer.
// Production networks run in float32; the templated form exists so tests can
// replay the exact same math in float64 for finite-difference checks.

#include <cassert>
#include <cstddef>
#include <numeric>
#include <vector>

#include "ambc/core.hpp"

namespace ambc::nn {

template <class T>
struct TensorT {
  std::vector<int> shape;  // up to 4 axes, batch x channels x height x width
  std::vector<T> data;
  std::vector<T> grad;  // empty unless allocated

  TensorT() = default;
  explicit TensorT(std::vector<int> s) : shape(std::move(s)) {
    data.assign(numel(), T{});
  }

  long numel() const {
    long n = 1;
    for (int d : shape) n *= d;
    return shape.empty() ? 0 : n;
  }

  int dim(std::size_t i) const { return i < shape.size() ? shape[i] : 1; }

  T* p() { return data.data(); }
  const T* p() const { return data.data(); }

  void alloc_grad() { grad.assign(data.size(), T{}); }
};

using Tensor = TensorT<float>;

/// True when every element is finite. Debug builds assert this after each
/// layer forward/backward.
template <class T>
bool all_finite(const std::vector<T>& v) {
  for (T x : v)
    if (!(x == x) || x > std::numeric_limits<T>::max() ||
        x < std::numeric_limits<T>::lowest())
      return false;
  return true;
}

#ifdef NDEBUG
#define AMBC_CHECK_FINITE(vec) ((void)0)
#else
#define AMBC_CHECK_FINITE(vec) assert(::ambc::nn::all_finite(vec))
#endif

}  // namespace ambc::nn
