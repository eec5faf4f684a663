#pragma once

// Named parameter registry plus the bias-corrected Adam optimizer. The
// registry doubles as the checkpoint tensor table; BN running statistics are
// registered as non-trainable so they serialize but are never updated by the
// optimizer.

#include <cmath>
#include <string>
#include <vector>

#include "ambc/nn/tensor.hpp"
#include "ambc/simd.hpp"

namespace ambc::nn {

struct ParamRef {
  std::string name;
  std::vector<int> dims;
  float* data = nullptr;
  float* grad = nullptr;  // null for non-trainable buffers
  bool trainable = true;

  long size() const {
    long n = 1;
    for (int d : dims) n *= d;
    return dims.empty() ? 0 : n;
  }
};

class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  double lr() const { return lr_; }
  long step_count() const { return step_; }

  /// One update over every trainable parameter. Gradients are left
  /// untouched; zero them on the model between steps.
  void step(const std::vector<ParamRef>& params) {
    if (m_.empty()) {
      for (const auto& p : params) {
        const std::size_t n = p.trainable ? static_cast<std::size_t>(p.size()) : 0;
        m_.emplace_back(n, 0.0f);
        v_.emplace_back(n, 0.0f);
      }
    }
    if (m_.size() != params.size())
      throw UsageError("Adam::step: parameter list changed between steps");
    ++step_;
    const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(beta1_, step_)));
    const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(beta2_, step_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamRef& p = params[i];
      if (!p.trainable) continue;
      if (static_cast<long>(m_[i].size()) != p.size())
        throw UsageError("Adam::step: parameter shape changed");
      simd::adam_update(p.data, p.grad, m_[i].data(), v_[i].data(),
                        static_cast<std::size_t>(p.size()),
                        static_cast<float>(lr_), static_cast<float>(beta1_),
                        static_cast<float>(beta2_), static_cast<float>(eps_),
                        c1, c2);
    }
  }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

}  // namespace ambc::nn
