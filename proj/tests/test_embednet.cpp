#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "ambc/embednet.hpp"
#include "ambc/harness.hpp"
#include "doctest.h"

using namespace ambc;

namespace {

SystemConfig base_config() {
  SystemConfig cfg;
  cfg.n_tags = 2;
  cfg.n_antennas = 4;
  cfg.str_samples = 20;
  cfg.frame_len = 160;
  cfg.n_pilots = 32;
  cfg.set_uniform_zeta(-20.0);
  cfg.snr_db = 20.0;
  cfg.source = SourceKind::Qpsk;
  cfg.seed = 55;
  return cfg;
}

std::uint64_t hash_params(EmbedNet& net) {
  std::uint64_t h = 1469598103934665603ull;
  net.visit([&](const char*, const std::vector<int>&, std::vector<float>& data,
                std::vector<float>*) {
    const unsigned char* bytes = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t i = 0; i < data.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  });
  return h;
}

}  // namespace

TEST_CASE("covariance feature: zeros, outer product, trace identity") {
  std::vector<cplx> zeros(20 * 4, cplx{0.0, 0.0});
  const CovarianceFeature z = covariance_feature(zeros.data(), 20, 4);
  for (const cplx& v : z.r.a) CHECK(v == cplx{0.0, 0.0});
  for (float v : z.u.data) CHECK(v == 0.0f);

  RngStream rng(1, 0);
  const auto x = sample_circular_gaussian(rng, 4, 1.0);
  const CovarianceFeature single = covariance_feature(x.data(), 1, 4);
  double norm = 0.0, trace = 0.0;
  for (int a = 0; a < 4; ++a) {
    norm += std::norm(x[a]);
    trace += single.r.at(a, a).real();
    for (int b = 0; b < 4; ++b)
      CHECK(std::abs(single.r.at(a, b) - x[a] * std::conj(x[b])) < 1e-14);
  }
  CHECK(std::fabs(trace - norm) < 1e-12);

  const auto big = sample_circular_gaussian(rng, 20 * 4, 1.0);
  const CovarianceFeature f = covariance_feature(big.data(), 20, 4);
  double direct = 0.0;
  for (const cplx& v : big) direct += std::norm(v);
  direct /= 20.0;
  double tr = 0.0;
  for (int a = 0; a < 4; ++a) tr += f.r.at(a, a).real();
  CHECK(std::fabs(tr - direct) < 1e-10);
}

TEST_CASE("covariance feature: hermitian PSD with symmetric/antisymmetric planes") {
  RngStream rng(2, 0);
  const auto x = sample_circular_gaussian(rng, 20 * 4, 2.0);
  const CovarianceFeature f = covariance_feature(x.data(), 20, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      CHECK(std::abs(f.r.at(a, b) - std::conj(f.r.at(b, a))) < 1e-12);
      const float re_ab = f.u.data[a * 4 + b];
      const float re_ba = f.u.data[b * 4 + a];
      const float im_ab = f.u.data[16 + a * 4 + b];
      const float im_ba = f.u.data[16 + b * 4 + a];
      CHECK(re_ab == re_ba);
      CHECK(im_ab == -im_ba);
    }
  // PSD: random quadratic forms are nonnegative
  for (int probe = 0; probe < 50; ++probe) {
    const auto v = sample_circular_gaussian(rng, 4, 1.0);
    cplx acc{0.0, 0.0};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        acc += std::conj(v[a]) * f.r.at(a, b) * v[b];
    CHECK(acc.real() > -1e-10);
  }
}

TEST_CASE("covariance feature is invariant to a global phase") {
  RngStream rng(3, 0);
  auto x = sample_circular_gaussian(rng, 20 * 4, 1.0);
  const CovarianceFeature before = covariance_feature(x.data(), 20, 4);
  const cplx phase = std::polar(1.0, 1.234);
  for (auto& v : x) v *= phase;
  const CovarianceFeature after = covariance_feature(x.data(), 20, 4);
  for (int i = 0; i < 16; ++i)
    CHECK(std::abs(before.r.a[i] - after.r.a[i]) < 1e-12);
}

TEST_CASE("embedding network: parameter count and determinism") {
  EmbedNet net = make_embednet(4, 42);
  // conv1 2*32*9 + bn1 2*32 + conv2 32*64*9 + bn2 2*64 + fc 1024*64 + 64
  CHECK(net.trainable_param_count() == 576 + 64 + 18432 + 128 + 65536 + 64);
  CHECK(net.trainable_param_count() == 84800);

  RngStream rng(4, 0);
  nn::Tensor x({2, 2, 4, 4});
  for (auto& v : x.data) v = static_cast<float>(rng.next_double());
  std::copy_n(x.p(), 32, x.p() + 32);  // two identical inputs
  const nn::Tensor z = net.forward(x, false);
  for (int i = 0; i < 64; ++i) CHECK(z.data[i] == z.data[64 + i]);
  const nn::Tensor z2 = net.forward(x, false);
  CHECK(z.data == z2.data);
}

TEST_CASE("prototypes: means, missing class, reference oracle") {
  RngStream rng(5, 0);
  // one pilot per class: prototype equals that embedding
  nn::Tensor emb({4, 3});
  for (auto& v : emb.data) v = static_cast<float>(rng.next_double());
  const PrototypeSet one = form_prototypes(emb, {0, 1, 2, 3}, 4);
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 3; ++i) CHECK(one.proto(j)[i] == emb.p()[j * 3 + i]);

  // two identical pilots per class: prototype equals them
  nn::Tensor twin({4, 3});
  for (int i = 0; i < 3; ++i) {
    twin.p()[0 * 3 + i] = twin.p()[1 * 3 + i] = 0.5f + i;
    twin.p()[2 * 3 + i] = twin.p()[3 * 3 + i] = -1.0f + i;
  }
  const PrototypeSet tw = form_prototypes(twin, {0, 0, 1, 1}, 2);
  for (int i = 0; i < 3; ++i) {
    CHECK(tw.proto(0)[i] == doctest::Approx(0.5f + i));
    CHECK(tw.proto(1)[i] == doctest::Approx(-1.0f + i));
  }

  // random balanced set vs a scalar reference mean
  nn::Tensor big({32, 64});
  for (auto& v : big.data) v = static_cast<float>(rng.next_double() * 2 - 1);
  std::vector<int> labels(32);
  for (int t = 0; t < 32; ++t) labels[t] = t % 4;
  const PrototypeSet set = form_prototypes(big, labels, 4);
  for (int j = 0; j < 4; ++j) {
    for (int i = 0; i < 64; ++i) {
      double ref = 0.0;
      int count = 0;
      for (int t = 0; t < 32; ++t)
        if (labels[t] == j) {
          ref += big.p()[t * 64 + i];
          ++count;
        }
      ref /= count;
      CHECK(std::fabs(set.proto(j)[i] - ref) < 1e-6);
    }
  }

  // a class with no pilots is a hard error naming the class
  CHECK_THROWS_WITH_AS(
      (void)form_prototypes(emb, {0, 1, 2, 2}, 4),
      doctest::Contains("uncovered class 3"), ConfigError);
}

TEST_CASE("classification: exact hit, translation invariance, naive oracle") {
  RngStream rng(6, 0);
  PrototypeSet protos;
  protos.n_classes = 8;
  protos.dim = 16;
  protos.prototypes.resize(8 * 16);
  protos.counts.assign(8, 1);
  for (auto& v : protos.prototypes) v = static_cast<float>(rng.next_double());

  std::vector<float> q(protos.proto(3), protos.proto(3) + 16);
  CHECK(classify(q.data(), protos) == 3);

  // common shift of query and all prototypes preserves the decision
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<float> query(16);
    for (auto& v : query) v = static_cast<float>(rng.next_double() * 4 - 2);
    const int before = classify(query.data(), protos);
    PrototypeSet shifted = protos;
    std::vector<float> offset(16);
    for (auto& v : offset) v = static_cast<float>(rng.next_double() - 0.5);
    for (int j = 0; j < 8; ++j)
      for (int i = 0; i < 16; ++i)
        shifted.prototypes[j * 16 + i] += offset[i];
    std::vector<float> moved = query;
    for (int i = 0; i < 16; ++i) moved[i] += offset[i];
    CHECK(classify(moved.data(), shifted) == before);
  }

  // exhaustive naive-loop agreement, N <= 5
  for (int n = 1; n <= 5; ++n) {
    PrototypeSet p2;
    p2.n_classes = 1 << n;
    p2.dim = 8;
    p2.prototypes.resize(static_cast<std::size_t>(p2.n_classes) * 8);
    p2.counts.assign(p2.n_classes, 1);
    for (int rep = 0; rep < 200; ++rep) {
      for (auto& v : p2.prototypes) v = static_cast<float>(rng.next_double());
      std::vector<float> query(8);
      for (auto& v : query) v = static_cast<float>(rng.next_double());
      int naive = 0;
      double best = 1e300;
      for (int j = 0; j < p2.n_classes; ++j) {
        double acc = 0.0;
        for (int i = 0; i < 8; ++i) {
          const double diff = query[i] - p2.proto(j)[i];
          acc += diff * diff;
        }
        if (acc < best) {
          best = acc;
          naive = j;
        }
      }
      CHECK(classify(query.data(), p2) == naive);
    }
  }
}

TEST_CASE("episode loss: double-precision oracle and descent direction") {
  RngStream rng(7, 0);
  const int t_len = 10, p = 6, d = 4, n_classes = 2;
  nn::Tensor emb({t_len, d});
  for (auto& v : emb.data) v = static_cast<float>(rng.next_double());
  std::vector<int> labels(t_len);
  for (int t = 0; t < t_len; ++t) labels[t] = t % n_classes;

  nn::Tensor demb;
  const EpisodeLoss el = episode_loss(emb, labels, p, n_classes, &demb);
  CHECK(el.dist_sq.dim(0) == t_len - p);
  CHECK(el.dist_sq.dim(1) == n_classes);
  CHECK(el.loss >= 0.0);

  // independent double-precision evaluation
  std::vector<double> proto(n_classes * d, 0.0);
  std::vector<int> counts(n_classes, 0);
  for (int t = 0; t < p; ++t) {
    counts[labels[t]]++;
    for (int i = 0; i < d; ++i) proto[labels[t] * d + i] += emb.p()[t * d + i];
  }
  for (int j = 0; j < n_classes; ++j)
    for (int i = 0; i < d; ++i) proto[j * d + i] /= counts[j];
  double ref_loss = 0.0;
  for (int q = p; q < t_len; ++q) {
    std::vector<double> logit(n_classes);
    for (int j = 0; j < n_classes; ++j) {
      double acc = 0.0;
      for (int i = 0; i < d; ++i) {
        const double diff = emb.p()[q * d + i] - proto[j * d + i];
        acc += diff * diff;
      }
      logit[j] = -acc;
    }
    double denom = 0.0;
    for (double l : logit) denom += std::exp(l);
    ref_loss += -std::log(std::exp(logit[labels[q]]) / denom);
  }
  ref_loss /= (t_len - p);
  CHECK(el.loss == doctest::Approx(ref_loss).epsilon(1e-5));

  // finite-difference check of the embedding gradient
  for (std::size_t i = 0; i < emb.data.size(); i += 5) {
    const float keep = emb.data[i];
    const float h = 1e-2f;
    emb.data[i] = keep + h;
    const double up = episode_loss(emb, labels, p, n_classes, nullptr).loss;
    emb.data[i] = keep - h;
    const double down = episode_loss(emb, labels, p, n_classes, nullptr).loss;
    emb.data[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({0.02, std::fabs(fd), std::fabs((double)demb.data[i])});
    CHECK(std::fabs(fd - demb.data[i]) / scale < 5e-2);
  }
}

TEST_CASE("detect_frame: shape, immutability and untrained baseline") {
  SystemConfig cfg = base_config();
  EmbedNet net = make_embednet(cfg.n_antennas, 11);
  const PilotSchedule sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots);
  const std::uint64_t before = hash_params(net);
  long errors = 0, bits = 0;
  for (int trial = 0; trial < 150; ++trial) {
    RngStream rng(cfg.seed, make_stream_id(stream_lane::kEval, 1, trial));
    const ChannelRealization ch = draw_channel(cfg, rng);
    const Frame fr = build_frame(cfg, ch, sched, rng);
    const auto decided = detect_frame(fr, net);
    CHECK(static_cast<int>(decided.size()) ==
          (cfg.frame_len - cfg.n_pilots) * cfg.n_tags);
    errors += count_frame_bit_errors(fr, decided);
    bits += (cfg.frame_len - cfg.n_pilots) * cfg.n_tags;
  }
  CHECK(hash_params(net) == before);  // detection never touches the weights
  // At 20 dB the per-frame prototypes carry an untrained embedding to a low
  // BER already; randomness shows at noisy SNR, where an untrained net is
  // far off the trained operating curve.
  CHECK(static_cast<double>(errors) / bits < 0.05);
  SystemConfig noisy = cfg;
  noisy.snr_db = 0.0;
  long noisy_errors = 0, noisy_bits = 0;
  for (int trial = 0; trial < 150; ++trial) {
    RngStream rng(noisy.seed, make_stream_id(stream_lane::kEval, 6, trial));
    const ChannelRealization ch = draw_channel(noisy, rng);
    const Frame fr = build_frame(noisy, ch, sched, rng);
    noisy_errors += count_frame_bit_errors(fr, detect_frame(fr, net));
    noisy_bits += (noisy.frame_len - noisy.n_pilots) * noisy.n_tags;
  }
  CHECK(static_cast<double>(noisy_errors) / noisy_bits > 0.25);
}

TEST_CASE("noiseless constant-modulus frames decode perfectly") {
  // with |s| = 1 and no noise every symbol of a class has the identical
  // covariance feature, so nearest-prototype matching is exact even for an
  // untrained embedding
  SystemConfig cfg = base_config();
  cfg.snr_db = std::numeric_limits<double>::infinity();
  EmbedNet net = make_embednet(cfg.n_antennas, 12);
  const PilotSchedule sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots);
  for (int trial = 0; trial < 5; ++trial) {
    RngStream rng(cfg.seed, make_stream_id(stream_lane::kEval, 2, trial));
    const ChannelRealization ch = draw_channel(cfg, rng);
    const Frame fr = build_frame(cfg, ch, sched, rng);
    const auto decided = detect_frame(fr, net);
    CHECK(count_frame_bit_errors(fr, decided) == 0);
  }
}

TEST_CASE("short episodic training runs and logs finite losses") {
  SystemConfig cfg = base_config();
  cfg.n_tags = 1;
  cfg.n_antennas = 2;
  cfg.str_samples = 6;
  cfg.frame_len = 40;
  cfg.n_pilots = 8;
  cfg.set_uniform_zeta(-10.0);
  EmbedNet net = make_embednet(cfg.n_antennas, 13);
  nn::Adam opt(1e-3);
  const TrainLog log = train_episodic(cfg, 60, net, opt);
  CHECK(log.episodes == 60);
  CHECK(!log.losses.empty());
  for (double l : log.losses) CHECK(std::isfinite(l));
}
