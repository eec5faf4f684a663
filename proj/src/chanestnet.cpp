#include "ambc/chanestnet.hpp"

#include <cmath>

#include "ambc/simd.hpp"

namespace ambc {

namespace {

// configuration index of a one-hot pilot row: 0 = all off, i = only tag i-1 on
int config_of_row(const std::uint8_t* row, int n_tags) {
  int ones = 0, where = -1;
  for (int i = 0; i < n_tags; ++i) {
    if (row[i]) {
      ++ones;
      where = i;
    }
  }
  if (ones == 0) return 0;
  if (ones == 1) return where + 1;
  throw ConfigError("correlate_pilots: pilot row is not one-hot");
}

}  // namespace

CorrelationFeature correlate_pilots(const Frame& frame) {
  const int n = frame.n_tags, m = frame.m_antennas, k = frame.k_samples;
  CorrelationFeature feat;
  feat.w_corr = CMatrix(n + 1, m);
  std::vector<int> counts(static_cast<std::size_t>(n) + 1, 0);
  for (int t = 0; t < frame.pilot_len; ++t) {
    const int conf = config_of_row(frame.state_row(t), n);
    const cplx* srow = frame.ambient_row(t);
    double s2 = 0.0;
    for (int kk = 0; kk < k; ++kk) s2 += std::norm(srow[kk]);
    if (s2 <= 0.0)
      throw ConfigError("correlate_pilots: degenerate pilot with zero ambient energy");
    std::vector<cplx> acc(static_cast<std::size_t>(m), cplx{0.0, 0.0});
    const cplx* block = frame.symbol_obs(t);
    for (int kk = 0; kk < k; ++kk)
      simd::caxpy(acc.data(), block + static_cast<std::size_t>(kk) * m,
                  std::conj(srow[kk]), static_cast<std::size_t>(m));
    cplx* dst = feat.w_corr.row(conf);
    for (int a = 0; a < m; ++a) dst[a] += acc[static_cast<std::size_t>(a)] / s2;
    counts[static_cast<std::size_t>(conf)]++;
  }
  for (int i = 0; i <= n; ++i) {
    if (counts[static_cast<std::size_t>(i)] == 0)
      throw ConfigError("correlate_pilots: configuration " + std::to_string(i) +
                        " has no pilot");
    cplx* row = feat.w_corr.row(i);
    for (int a = 0; a < m; ++a) row[a] /= counts[static_cast<std::size_t>(i)];
  }
  feat.c = nn::Tensor({2, n + 1, m});
  float* re = feat.c.p();
  float* im = feat.c.p() + static_cast<std::size_t>(n + 1) * m;
  for (int i = 0; i <= n; ++i) {
    for (int a = 0; a < m; ++a) {
      re[i * m + a] = static_cast<float>(feat.w_corr.at(i, a).real());
      im[i * m + a] = static_cast<float>(feat.w_corr.at(i, a).imag());
    }
  }
  return feat;
}

nn::Tensor channel_label(const ChannelRealization& ch) {
  const int n = ch.n_tags, m = ch.m_antennas;
  nn::Tensor d({n + 1, 2 * m});
  for (int a = 0; a < m; ++a) {
    d.p()[a] = static_cast<float>(ch.h[static_cast<std::size_t>(a)].real());
    d.p()[m + a] = static_cast<float>(ch.h[static_cast<std::size_t>(a)].imag());
  }
  for (int i = 0; i < n; ++i) {
    float* row = d.p() + static_cast<std::size_t>(i + 1) * 2 * m;
    const cplx* v = ch.v.row(i);
    for (int a = 0; a < m; ++a) {
      row[a] = static_cast<float>(v[a].real());
      row[m + a] = static_cast<float>(v[a].imag());
    }
  }
  return d;
}

namespace {

ChannelEstimate assemble_estimate(const float* out, int n, int m) {
  ChannelEstimate est;
  est.h_hat.resize(static_cast<std::size_t>(m));
  for (int a = 0; a < m; ++a)
    est.h_hat[static_cast<std::size_t>(a)] = cplx{out[a], out[m + a]};
  est.v_hat = CMatrix(n, m);
  for (int i = 0; i < n; ++i) {
    const float* row = out + static_cast<std::size_t>(i + 1) * 2 * m;
    for (int a = 0; a < m; ++a) est.v_hat.at(i, a) = cplx{row[a], row[m + a]};
  }
  const int nh = 1 << n;
  est.w_hat = CMatrix(nh, m);
  for (int j = 0; j < nh; ++j) {
    cplx* wrow = est.w_hat.row(j);
    for (int a = 0; a < m; ++a) wrow[a] = est.h_hat[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i)
      if ((j >> i) & 1)
        for (int a = 0; a < m; ++a) wrow[a] += est.v_hat.at(i, a);
  }
  return est;
}

}  // namespace

ChannelEstimate ChannelEstimate::from_truth(const ChannelRealization& ch) {
  const nn::Tensor d = channel_label(ch);
  return assemble_estimate(d.p(), ch.n_tags, ch.m_antennas);
}

ChanEstNet make_chanestnet(int n_tags, int m_antennas, std::uint64_t seed,
                           bool pool_to_input) {
  ChanEstNet net(n_tags, m_antennas, pool_to_input);
  RngStream rng(seed, make_stream_id(stream_lane::kChanEstNetInit, 0, 0));
  net.init(rng);
  return net;
}

std::vector<nn::ParamRef> chanestnet_params(ChanEstNet& net) {
  std::vector<nn::ParamRef> out;
  net.visit([&](const char* name, const std::vector<int>& dims,
                std::vector<float>& data, std::vector<float>* grad) {
    out.push_back({name, dims, data.data(), grad ? grad->data() : nullptr,
                   grad != nullptr});
  });
  return out;
}

void save_chanestnet(const std::string& path, ChanEstNet& net,
                     const nn::Metadata& extra_meta) {
  nn::Metadata meta = extra_meta;
  meta["arch"] = "chanestnet";
  meta["n_tags"] = std::to_string(net.n_tags);
  meta["m_antennas"] = std::to_string(net.m_antennas);
  meta["pool_to_input"] = net.pool_to_input ? "1" : "0";
  save_checkpoint(path, chanestnet_params(net), meta);
}

ChanEstNet load_chanestnet(const std::string& path, nn::Metadata* meta_out) {
  const nn::LoadedCheckpoint ck = nn::read_checkpoint(path);
  const auto arch = ck.meta.find("arch");
  if (arch == ck.meta.end() || arch->second != "chanestnet")
    throw nn::CheckpointShapeError("checkpoint is not a chanestnet model: " + path);
  const auto n = ck.meta.find("n_tags");
  const auto m = ck.meta.find("m_antennas");
  if (n == ck.meta.end() || m == ck.meta.end())
    throw nn::CheckpointShapeError("chanestnet checkpoint lacks n_tags/m_antennas");
  const auto pti = ck.meta.find("pool_to_input");
  ChanEstNet net(std::stoi(n->second), std::stoi(m->second),
                 pti != ck.meta.end() && pti->second == "1");
  nn::apply_checkpoint(ck, chanestnet_params(net));
  if (meta_out) *meta_out = ck.meta;
  return net;
}

ChannelEstimate estimate_channels(const CorrelationFeature& feature,
                                  ChanEstNet& net) {
  const int n = net.n_tags, m = net.m_antennas;
  if (feature.c.dim(1) != n + 1 || feature.c.dim(2) != m)
    throw ConfigError("estimate_channels: feature shape mismatch");
  nn::Tensor x({1, 2, n + 1, m});
  std::copy_n(feature.c.p(), feature.c.numel(), x.p());
  const nn::Tensor out = net.forward(x, /*train=*/false);
  return assemble_estimate(out.p(), n, m);
}

ChanEstTrainLog train_chanestnet(const SystemConfig& cfg, long n_samples,
                                 int epochs, ChanEstNet& net, nn::Adam& opt) {
  cfg.validate();
  if (net.n_tags != cfg.n_tags || net.m_antennas != cfg.n_antennas)
    throw ConfigError("train_chanestnet: net dimensions mismatch");
  if (n_samples < 1 || epochs < 1)
    throw ConfigError("train_chanestnet: need samples and epochs >= 1");
  const PilotSchedule sched = PilotSchedule::one_hot(cfg.n_tags, cfg.n_pilots);
  const int n = cfg.n_tags, m = cfg.n_antennas;
  const std::size_t in_per = static_cast<std::size_t>(2) * (n + 1) * m;
  const std::size_t out_per = static_cast<std::size_t>(n + 1) * 2 * m;

  // dataset of (correlation feature, label) pairs from fresh frames
  std::vector<float> inputs(static_cast<std::size_t>(n_samples) * in_per);
  std::vector<float> targets(static_cast<std::size_t>(n_samples) * out_per);
  for (long idx = 0; idx < n_samples; ++idx) {
    RngStream rng(cfg.seed, make_stream_id(stream_lane::kChanEstNetTrain, 0,
                                           static_cast<std::uint64_t>(idx)));
    const ChannelRealization ch = draw_channel(cfg, rng);
    const Frame frame = build_frame(cfg, ch, sched, rng);
    const CorrelationFeature feat = correlate_pilots(frame);
    const nn::Tensor label = channel_label(ch);
    std::copy_n(feat.c.p(), in_per, inputs.data() + idx * in_per);
    std::copy_n(label.p(), out_per, targets.data() + idx * out_per);
  }

  auto params = chanestnet_params(net);
  ChanEstTrainLog log;
  log.samples = n_samples;
  std::vector<long> order(static_cast<std::size_t>(n_samples));
  for (long i = 0; i < n_samples; ++i) order[static_cast<std::size_t>(i)] = i;
  RngStream shuffle_rng(cfg.seed,
                        make_stream_id(stream_lane::kChanEstNetTrain, 1, 0));
  constexpr int kBatch = 128;
  net.zero_grad();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_total = 0.0;
    long batches = 0;
    for (long start = 0; start < n_samples; start += kBatch) {
      const int b = static_cast<int>(std::min<long>(kBatch, n_samples - start));
      nn::Tensor x({b, 2, n + 1, m});
      nn::Tensor y({b, static_cast<int>(out_per)});
      for (int i = 0; i < b; ++i) {
        const long src = order[static_cast<std::size_t>(start + i)];
        std::copy_n(inputs.data() + src * in_per, in_per, x.p() + i * in_per);
        std::copy_n(targets.data() + src * out_per, out_per, y.p() + i * out_per);
      }
      const nn::Tensor pred = net.forward(x, /*train=*/true);
      const nn::LossResult<float> mse = nn::mse_loss(pred, y);
      net.backward(mse.grad);
      opt.step(params);
      net.zero_grad();
      epoch_total += mse.loss;
      ++batches;
    }
    log.epoch_loss.push_back(epoch_total / static_cast<double>(batches));
  }
  return log;
}

std::vector<std::uint8_t> detect_frame_lrt(const Frame& frame,
                                           const ChannelEstimate& est,
                                           const SystemConfig& cfg) {
  const int n = frame.n_tags;
  if (est.w_hat.rows != (1 << n) || est.w_hat.cols != frame.m_antennas)
    throw ConfigError("detect_frame_lrt: estimate dimensions mismatch");
  const int q_len = frame.t_len - frame.pilot_len;
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(q_len) * n);
  GaussianLrtCache cache;
  const bool gaussian = cfg.source == SourceKind::GaussianSource;
  if (gaussian)
    cache = GaussianLrtCache::build(est.w_hat, cfg.sigma_s_sq, cfg.sigma_u_sq());
  for (int q = 0; q < q_len; ++q) {
    const int t = frame.pilot_len + q;
    const LrtDecision d =
        gaussian ? lrt_gaussian(frame.symbol_obs(t), frame.k_samples, cache)
                 : lrt_constellation(frame.symbol_obs(t), frame.ambient_row(t),
                                     frame.k_samples, est.w_hat,
                                     cfg.sigma_u_sq());
    for (int i = 0; i < n; ++i)
      bits[static_cast<std::size_t>(q) * n + i] =
          static_cast<std::uint8_t>((d.chosen.index >> i) & 1);
  }
  return bits;
}

}  // namespace ambc
