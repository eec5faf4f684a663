#pragma once

// Hybrid detector: one-hot pilot correlations in, effective channel
// coefficients out, classical multi-hypothesis LRT over the data symbols.
// The network input rows are the correlations of configuration i (direct
// path h for i = 0, h + v_i otherwise); the labels stack h and the bare
// v_i, so the network learns to subtract the direct path from the per-tag
// rows as well as to denoise.

#include <cstdint>
#include <string>
#include <vector>

#include "ambc/channel.hpp"
#include "ambc/core.hpp"
#include "ambc/detectors.hpp"
#include "ambc/nn/adam.hpp"
#include "ambc/nn/checkpoint.hpp"
#include "ambc/nn/layers.hpp"
#include "ambc/nn/loss.hpp"

namespace ambc {

/// Per-configuration pilot correlations: row i of w_corr is the average over
/// configuration i's pilots of (sum_k conj(s_k) x_k) / (sum_k |s_k|^2).
struct CorrelationFeature {
  CMatrix w_corr;  // (N+1) x M
  nn::Tensor c;    // [2, N+1, M] stacked Re/Im
};

/// Requires a frame built with the one-hot schedule (configurations are
/// recovered from the pilot state rows) and the true ambient pilot symbols.
CorrelationFeature correlate_pilots(const Frame& frame);

/// Ground-truth regression target: row 0 = [Re(h), Im(h)], row i =
/// [Re(v_i), Im(v_i)], flattened to (N+1)*2M reals.
nn::Tensor channel_label(const ChannelRealization& ch);

/// Channel estimates reshaped from the network output, with the 2^N
/// effective channels derived as w_j = h + sum_i b_{j,i} v_i.
struct ChannelEstimate {
  std::vector<cplx> h_hat;  // M
  CMatrix v_hat;            // N x M
  CMatrix w_hat;            // 2^N x M

  static ChannelEstimate from_truth(const ChannelRealization& ch);
};

/// Three conv blocks (2->32->64->128, 3x3, pad 1, BN + ReLU),
/// AdaptiveAvgPool(4,4), flatten(2048), FC(2048->256) + ReLU,
/// FC(256 -> (N+1)*2M). `pool_to_input` switches the pool target to the
/// input size (N+1) x M instead of 4 x 4 (off by default).
template <class T>
struct ChanEstNetT {
  int n_tags = 2;
  int m_antennas = 4;
  bool pool_to_input = false;

  nn::Conv2d<T> conv1{2, 32};
  nn::BatchNorm2d<T> bn1{32};
  nn::ReLU<T> relu1;
  nn::Conv2d<T> conv2{32, 64};
  nn::BatchNorm2d<T> bn2{64};
  nn::ReLU<T> relu2;
  nn::Conv2d<T> conv3{64, 128};
  nn::BatchNorm2d<T> bn3{128};
  nn::ReLU<T> relu3;
  nn::AdaptiveAvgPool2d<T> pool{4, 4};
  nn::Linear<T> fc1;
  nn::ReLU<T> relu_fc;
  nn::Linear<T> fc2;

  ChanEstNetT() = default;
  ChanEstNetT(int n, int m, bool pool_input = false)
      : n_tags(n),
        m_antennas(m),
        pool_to_input(pool_input),
        pool(pool_input ? n + 1 : 4, pool_input ? m : 4),
        fc1(128 * (pool_input ? (n + 1) * m : 16), 256),
        fc2(256, (n + 1) * 2 * m) {}

  int flat_dim() const { return fc1.in_f; }
  int out_dim() const { return fc2.out_f; }

  void init(RngStream& rng) {
    conv1.init(rng);
    conv2.init(rng);
    conv3.init(rng);
    fc1.init(rng);
    fc2.init(rng);
  }

  /// [B, 2, N+1, M] -> [B, (N+1)*2M]
  nn::TensorT<T> forward(const nn::TensorT<T>& x, bool train) {
    auto y = conv1.forward(x, train);
    y = bn1.forward(y, train);
    y = relu1.forward(y, train);
    y = conv2.forward(y, train);
    y = bn2.forward(y, train);
    y = relu2.forward(y, train);
    y = conv3.forward(y, train);
    y = bn3.forward(y, train);
    y = relu3.forward(y, train);
    y = pool.forward(y, train);
    y.shape = {y.dim(0), flat_dim()};
    y = fc1.forward(y, train);
    y = relu_fc.forward(y, train);
    return fc2.forward(y, train);
  }

  void backward(const nn::TensorT<T>& gy) {
    auto g = fc2.backward(gy);
    g = relu_fc.backward(g);
    g = fc1.backward(g);
    g.shape = {g.dim(0), 128, pool.out_h, pool.out_w};
    g = pool.backward(g);
    g = relu3.backward(g);
    g = bn3.backward(g);
    g = conv3.backward(g);
    g = relu2.backward(g);
    g = bn2.backward(g);
    g = conv2.backward(g);
    g = relu1.backward(g);
    g = bn1.backward(g);
    (void)conv1.backward(g);
  }

  void zero_grad() {
    conv1.zero_grad();
    bn1.zero_grad();
    conv2.zero_grad();
    bn2.zero_grad();
    conv3.zero_grad();
    bn3.zero_grad();
    fc1.zero_grad();
    fc2.zero_grad();
  }

  template <class F>
  void visit(F&& f) {
    f("conv1.weight", std::vector<int>{32, 2, 3, 3}, conv1.weight, &conv1.wgrad);
    f("bn1.gamma", std::vector<int>{32}, bn1.gamma, &bn1.ggrad);
    f("bn1.beta", std::vector<int>{32}, bn1.beta, &bn1.bgrad);
    f("bn1.running_mean", std::vector<int>{32}, bn1.running_mean, nullptr);
    f("bn1.running_var", std::vector<int>{32}, bn1.running_var, nullptr);
    f("conv2.weight", std::vector<int>{64, 32, 3, 3}, conv2.weight, &conv2.wgrad);
    f("bn2.gamma", std::vector<int>{64}, bn2.gamma, &bn2.ggrad);
    f("bn2.beta", std::vector<int>{64}, bn2.beta, &bn2.bgrad);
    f("bn2.running_mean", std::vector<int>{64}, bn2.running_mean, nullptr);
    f("bn2.running_var", std::vector<int>{64}, bn2.running_var, nullptr);
    f("conv3.weight", std::vector<int>{128, 64, 3, 3}, conv3.weight, &conv3.wgrad);
    f("bn3.gamma", std::vector<int>{128}, bn3.gamma, &bn3.ggrad);
    f("bn3.beta", std::vector<int>{128}, bn3.beta, &bn3.bgrad);
    f("bn3.running_mean", std::vector<int>{128}, bn3.running_mean, nullptr);
    f("bn3.running_var", std::vector<int>{128}, bn3.running_var, nullptr);
    f("fc1.weight", std::vector<int>{256, flat_dim()}, fc1.weight, &fc1.wgrad);
    f("fc1.bias", std::vector<int>{256}, fc1.bias, &fc1.bgrad);
    f("fc2.weight", std::vector<int>{out_dim(), 256}, fc2.weight, &fc2.wgrad);
    f("fc2.bias", std::vector<int>{out_dim()}, fc2.bias, &fc2.bgrad);
  }
};

using ChanEstNet = ChanEstNetT<float>;

ChanEstNet make_chanestnet(int n_tags, int m_antennas, std::uint64_t seed,
                           bool pool_to_input = false);
std::vector<nn::ParamRef> chanestnet_params(ChanEstNet& net);

void save_chanestnet(const std::string& path, ChanEstNet& net,
                     const nn::Metadata& extra_meta = {});
ChanEstNet load_chanestnet(const std::string& path,
                           nn::Metadata* meta_out = nullptr);

/// Eval-mode network pass on one correlation feature.
ChannelEstimate estimate_channels(const CorrelationFeature& feature,
                                  ChanEstNet& net);

struct ChanEstTrainLog {
  std::vector<double> epoch_loss;
  long samples = 0;
};

/// Supervised regression on (correlation feature, channel label) pairs from
/// freshly drawn one-hot frames at cfg.snr_db; batch 128, MSE objective.
ChanEstTrainLog train_chanestnet(const SystemConfig& cfg, long n_samples,
                                 int epochs, ChanEstNet& net, nn::Adam& opt);

/// Plug-in multi-hypothesis LRT over the data symbols using the estimated
/// effective channels: the known-symbol likelihood for constellation
/// sources, the covariance likelihood built from w_hat for the Gaussian
/// source. Returns (T-P) x N bits.
std::vector<std::uint8_t> detect_frame_lrt(const Frame& frame,
                                           const ChannelEstimate& est,
                                           const SystemConfig& cfg);

}  // namespace ambc
