#pragma once

// Softmax cross-entropy and MSE, each returning the scalar loss and the
// gradient with respect to the network output.

#include <cmath>
#include <vector>

#include "ambc/nn/tensor.hpp"

namespace ambc::nn {

template <class T>
struct LossResult {
  double loss = 0.0;
  TensorT<T> grad;
};

/// Mean over rows of -log softmax(logits)[label].
template <class T>
LossResult<T> softmax_cross_entropy(const TensorT<T>& logits,
                                    const std::vector<int>& labels) {
  const int b = logits.dim(0), c = logits.dim(1);
  if (static_cast<int>(labels.size()) != b)
    throw ConfigError("softmax_cross_entropy: label count mismatch");
  LossResult<T> out;
  out.grad = TensorT<T>({b, c});
  double total = 0.0;
  for (int bb = 0; bb < b; ++bb) {
    const T* row = logits.p() + static_cast<std::size_t>(bb) * c;
    T* grow = out.grad.p() + static_cast<std::size_t>(bb) * c;
    const int y = labels[static_cast<std::size_t>(bb)];
    if (y < 0 || y >= c) throw ConfigError("softmax_cross_entropy: bad label");
    T mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
    const double log_denom = std::log(denom);
    total += log_denom - static_cast<double>(row[y] - mx);
    for (int j = 0; j < c; ++j) {
      const double p = std::exp(static_cast<double>(row[j] - mx)) / denom;
      grow[j] = static_cast<T>((p - (j == y ? 1.0 : 0.0)) / b);
    }
  }
  out.loss = total / b;
  return out;
}

/// Sum of squared errors over all elements, averaged over the batch axis.
template <class T>
LossResult<T> mse_loss(const TensorT<T>& pred, const TensorT<T>& target) {
  if (pred.shape != target.shape) throw ConfigError("mse_loss: shape mismatch");
  const int b = pred.dim(0);
  LossResult<T> out;
  out.grad = TensorT<T>(pred.shape);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) -
                     static_cast<double>(target.data[i]);
    total += d * d;
    out.grad.data[i] = static_cast<T>(2.0 * d / b);
  }
  out.loss = total / b;
  return out;
}

}  // namespace ambc::nn
