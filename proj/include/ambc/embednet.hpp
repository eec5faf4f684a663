#pragma once

// CSI-free prototypical detector. Each tag symbol becomes a covariance
// feature; a small CNN embeds it in R^64; pilots of each joint tag state
// define a class prototype (their mean embedding) and data symbols classify
// to the nearest prototype. Per-frame adaptation happens entirely through
// the prototypes, never through the weights.

#include <cstdint>
#include <string>
#include <vector>

#include "ambc/channel.hpp"
#include "ambc/core.hpp"
#include "ambc/nn/adam.hpp"
#include "ambc/nn/checkpoint.hpp"
#include "ambc/nn/layers.hpp"
#include "ambc/nn/loss.hpp"

namespace ambc {

/// Sample covariance R = (1/K) X X^H of one tag symbol plus its stacked
/// Re/Im tensor form (the network input). R is Hermitian PSD; u[0] is
/// symmetric, u[1] antisymmetric.
struct CovarianceFeature {
  CMatrix r;     // M x M
  nn::Tensor u;  // [2, M, M]
};

CovarianceFeature covariance_feature(const cplx* obs, int k_samples,
                                     int m_antennas);

/// Covariance features of every symbol in a frame, as one [T, 2, M, M] batch.
nn::Tensor frame_features(const Frame& frame);

/// Conv(2->32) + BN + ReLU, Conv(32->64) + BN + ReLU, AdaptiveAvgPool(4,4),
/// flatten(1024), FC(1024->64). Embedding dimension fixed at 64.
template <class T>
struct EmbedNetT {
  static constexpr int kEmbedDim = 64;

  int m_antennas = 4;
  nn::Conv2d<T> conv1{2, 32};
  nn::BatchNorm2d<T> bn1{32};
  nn::ReLU<T> relu1;
  nn::Conv2d<T> conv2{32, 64};
  nn::BatchNorm2d<T> bn2{64};
  nn::ReLU<T> relu2;
  nn::AdaptiveAvgPool2d<T> pool{4, 4};
  nn::Linear<T> fc{64 * 4 * 4, kEmbedDim};

  void init(RngStream& rng) {
    conv1.init(rng);
    conv2.init(rng);
    fc.init(rng);
  }

  /// [B, 2, M, M] -> [B, 64]
  nn::TensorT<T> forward(const nn::TensorT<T>& x, bool train) {
    auto y = conv1.forward(x, train);
    y = bn1.forward(y, train);
    y = relu1.forward(y, train);
    y = conv2.forward(y, train);
    y = bn2.forward(y, train);
    y = relu2.forward(y, train);
    y = pool.forward(y, train);
    y.shape = {y.dim(0), 64 * 4 * 4};
    return fc.forward(y, train);
  }

  void backward(const nn::TensorT<T>& gz) {
    auto g = fc.backward(gz);
    g.shape = {g.dim(0), 64, 4, 4};
    g = pool.backward(g);
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
    fc.zero_grad();
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
    f("fc.weight", std::vector<int>{kEmbedDim, 64 * 4 * 4}, fc.weight, &fc.wgrad);
    f("fc.bias", std::vector<int>{kEmbedDim}, fc.bias, &fc.bgrad);
  }

  long trainable_param_count() {
    long n = 0;
    visit([&](const char*, const std::vector<int>& dims,
              const std::vector<T>&, std::vector<T>* grad) {
      if (!grad) return;
      long e = 1;
      for (int d : dims) e *= d;
      n += e;
    });
    return n;
  }
};

using EmbedNet = EmbedNetT<float>;

EmbedNet make_embednet(int m_antennas, std::uint64_t seed);
std::vector<nn::ParamRef> embednet_params(EmbedNet& net);

void save_embednet(const std::string& path, EmbedNet& net,
                   const nn::Metadata& extra_meta = {});
EmbedNet load_embednet(const std::string& path, nn::Metadata* meta_out = nullptr);

/// Per-class mean embeddings formed from pilot embeddings.
struct PrototypeSet {
  int n_classes = 0;
  int dim = 0;
  std::vector<float> prototypes;  // [n_classes, dim]
  std::vector<int> counts;

  const float* proto(int j) const {
    return prototypes.data() + static_cast<std::size_t>(j) * dim;
  }
};

/// Exact per-class means. A class with no pilot is an error naming the
/// class; the class-balanced schedule makes that impossible by construction,
/// so hitting it indicates a schedule bug.
PrototypeSet form_prototypes(const nn::Tensor& pilot_embeddings,
                             const std::vector<int>& pilot_labels,
                             int n_classes);

/// Nearest prototype in squared Euclidean distance, lowest index on ties.
int classify(const float* embedding, const PrototypeSet& protos);

/// Episodic loss over one frame's embeddings: prototypes from the first
/// `pilot_len` rows, logits = -||z_q - p_j||^2 for the rest, softmax
/// cross-entropy against the true query labels.
struct EpisodeLoss {
  double loss = 0.0;
  nn::Tensor dist_sq;  // [Q, 2^N] squared distances per query
};

/// When `demb` is non-null it receives d(loss)/d(embeddings), shape [T, D].
EpisodeLoss episode_loss(const nn::Tensor& embeddings,
                         const std::vector<int>& labels, int pilot_len,
                         int n_classes, nn::Tensor* demb);

struct TrainLog {
  std::vector<double> losses;  // one entry per optimizer step
  long episodes = 0;
};

/// Episodic training per the evaluation protocol: every episode draws a
/// fresh channel and class-balanced frame at cfg.snr_db, embeds all T
/// symbols with training-mode BN, and steps Adam once at least 128 query
/// samples have accumulated.
TrainLog train_episodic(const SystemConfig& cfg, long episodes, EmbedNet& net,
                        nn::Adam& opt);

/// Eval-mode detection of one frame's data symbols: prototypes from the
/// pilot portion only, nearest-prototype decisions decoded to bits.
/// Returns (T-P) x N bits. Never mutates the network.
std::vector<std::uint8_t> detect_frame(const Frame& frame, EmbedNet& net);

}  // namespace ambc
