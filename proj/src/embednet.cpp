#include "ambc/embednet.hpp"

#include <cmath>
#include <limits>

namespace ambc {

CovarianceFeature covariance_feature(const cplx* obs, int k_samples,
                                     int m_antennas) {
  if (k_samples < 1) throw ConfigError("covariance_feature: K must be >= 1");
  CovarianceFeature feat;
  feat.r = CMatrix(m_antennas, m_antennas);
  for (int kk = 0; kk < k_samples; ++kk) {
    const cplx* x = obs + static_cast<std::size_t>(kk) * m_antennas;
    for (int a = 0; a < m_antennas; ++a)
      for (int b = 0; b < m_antennas; ++b)
        feat.r.at(a, b) += x[a] * std::conj(x[b]);
  }
  const double inv_k = 1.0 / k_samples;
  for (auto& z : feat.r.a) z *= inv_k;
  feat.u = nn::Tensor({2, m_antennas, m_antennas});
  float* re = feat.u.p();
  float* im = feat.u.p() + static_cast<std::size_t>(m_antennas) * m_antennas;
  for (int a = 0; a < m_antennas; ++a) {
    for (int b = 0; b < m_antennas; ++b) {
      re[a * m_antennas + b] = static_cast<float>(feat.r.at(a, b).real());
      im[a * m_antennas + b] = static_cast<float>(feat.r.at(a, b).imag());
    }
  }
  return feat;
}

nn::Tensor frame_features(const Frame& frame) {
  const int m = frame.m_antennas;
  nn::Tensor u({frame.t_len, 2, m, m});
  const std::size_t per = static_cast<std::size_t>(2) * m * m;
  for (int t = 0; t < frame.t_len; ++t) {
    const CovarianceFeature f =
        covariance_feature(frame.symbol_obs(t), frame.k_samples, m);
    std::copy_n(f.u.p(), per, u.p() + static_cast<std::size_t>(t) * per);
  }
  return u;
}

EmbedNet make_embednet(int m_antennas, std::uint64_t seed) {
  EmbedNet net;
  net.m_antennas = m_antennas;
  RngStream rng(seed, make_stream_id(stream_lane::kEmbedNetInit, 0, 0));
  net.init(rng);
  return net;
}

std::vector<nn::ParamRef> embednet_params(EmbedNet& net) {
  std::vector<nn::ParamRef> out;
  net.visit([&](const char* name, const std::vector<int>& dims,
                std::vector<float>& data, std::vector<float>* grad) {
    out.push_back({name, dims, data.data(), grad ? grad->data() : nullptr,
                   grad != nullptr});
  });
  return out;
}

void save_embednet(const std::string& path, EmbedNet& net,
                   const nn::Metadata& extra_meta) {
  nn::Metadata meta = extra_meta;
  meta["arch"] = "embednet";
  meta["m_antennas"] = std::to_string(net.m_antennas);
  meta["embed_dim"] = std::to_string(EmbedNet::kEmbedDim);
  save_checkpoint(path, embednet_params(net), meta);
}

EmbedNet load_embednet(const std::string& path, nn::Metadata* meta_out) {
  const nn::LoadedCheckpoint ck = nn::read_checkpoint(path);
  const auto arch = ck.meta.find("arch");
  if (arch == ck.meta.end() || arch->second != "embednet")
    throw nn::CheckpointShapeError("checkpoint is not an embednet model: " + path);
  EmbedNet net;
  const auto m = ck.meta.find("m_antennas");
  if (m != ck.meta.end()) net.m_antennas = std::stoi(m->second);
  nn::apply_checkpoint(ck, embednet_params(net));
  if (meta_out) *meta_out = ck.meta;
  return net;
}

PrototypeSet form_prototypes(const nn::Tensor& pilot_embeddings,
                             const std::vector<int>& pilot_labels,
                             int n_classes) {
  const int p = pilot_embeddings.dim(0);
  const int d = pilot_embeddings.dim(1);
  if (static_cast<int>(pilot_labels.size()) != p)
    throw ConfigError("form_prototypes: label count mismatch");
  PrototypeSet set;
  set.n_classes = n_classes;
  set.dim = d;
  set.prototypes.assign(static_cast<std::size_t>(n_classes) * d, 0.0f);
  set.counts.assign(static_cast<std::size_t>(n_classes), 0);
  for (int t = 0; t < p; ++t) {
    const int y = pilot_labels[static_cast<std::size_t>(t)];
    if (y < 0 || y >= n_classes)
      throw ConfigError("form_prototypes: label out of range");
    set.counts[static_cast<std::size_t>(y)]++;
    const float* z = pilot_embeddings.p() + static_cast<std::size_t>(t) * d;
    float* proto = set.prototypes.data() + static_cast<std::size_t>(y) * d;
    for (int i = 0; i < d; ++i) proto[i] += z[i];
  }
  for (int j = 0; j < n_classes; ++j) {
    if (set.counts[static_cast<std::size_t>(j)] == 0)
      throw ConfigError("uncovered class " + std::to_string(j) +
                        ": no pilot carries this tag-state combination");
    const float inv = 1.0f / static_cast<float>(set.counts[static_cast<std::size_t>(j)]);
    float* proto = set.prototypes.data() + static_cast<std::size_t>(j) * d;
    for (int i = 0; i < d; ++i) proto[i] *= inv;
  }
  return set;
}

namespace {
double dist_sq(const float* a, const float* b, int d) {
  double acc = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += diff * diff;
  }
  return acc;
}
}  // namespace

int classify(const float* embedding, const PrototypeSet& protos) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int j = 0; j < protos.n_classes; ++j) {
    const double d = dist_sq(embedding, protos.proto(j), protos.dim);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

EpisodeLoss episode_loss(const nn::Tensor& embeddings,
                         const std::vector<int>& labels, int pilot_len,
                         int n_classes, nn::Tensor* demb) {
  const int t_len = embeddings.dim(0);
  const int d = embeddings.dim(1);
  const int q_len = t_len - pilot_len;
  if (q_len < 1) throw ConfigError("episode_loss: no query symbols");
  if (static_cast<int>(labels.size()) != t_len)
    throw ConfigError("episode_loss: label count mismatch");

  nn::Tensor pilot_emb({pilot_len, d});
  std::copy_n(embeddings.p(), static_cast<std::size_t>(pilot_len) * d,
              pilot_emb.p());
  const std::vector<int> pilot_labels(labels.begin(), labels.begin() + pilot_len);
  const PrototypeSet protos =
      form_prototypes(pilot_emb, pilot_labels, n_classes);

  EpisodeLoss out;
  out.dist_sq = nn::Tensor({q_len, n_classes});
  nn::Tensor logits({q_len, n_classes});
  std::vector<int> query_labels(labels.begin() + pilot_len, labels.end());
  for (int q = 0; q < q_len; ++q) {
    const float* z = embeddings.p() + static_cast<std::size_t>(pilot_len + q) * d;
    for (int j = 0; j < n_classes; ++j) {
      const double d2 = dist_sq(z, protos.proto(j), d);
      out.dist_sq.p()[static_cast<std::size_t>(q) * n_classes + j] =
          static_cast<float>(d2);
      logits.p()[static_cast<std::size_t>(q) * n_classes + j] =
          static_cast<float>(-d2);
    }
  }
  const nn::LossResult<float> ce = nn::softmax_cross_entropy(logits, query_labels);
  out.loss = ce.loss;
  if (!demb) return out;

  *demb = nn::Tensor({t_len, d});
  std::vector<float> dproto(static_cast<std::size_t>(n_classes) * d, 0.0f);
  for (int q = 0; q < q_len; ++q) {
    const float* z = embeddings.p() + static_cast<std::size_t>(pilot_len + q) * d;
    float* dz = demb->p() + static_cast<std::size_t>(pilot_len + q) * d;
    const float* dl = ce.grad.p() + static_cast<std::size_t>(q) * n_classes;
    for (int j = 0; j < n_classes; ++j) {
      // logits = -||z - p||^2, so dz += dl * -2(z - p), dp += dl * 2(z - p)
      const float* pj = protos.proto(j);
      float* dpj = dproto.data() + static_cast<std::size_t>(j) * d;
      const float g = dl[j];
      for (int i = 0; i < d; ++i) {
        const float diff = z[i] - pj[i];
        dz[i] += -2.0f * g * diff;
        dpj[i] += 2.0f * g * diff;
      }
    }
  }
  // prototypes are class means over pilots
  for (int t = 0; t < pilot_len; ++t) {
    const int y = labels[static_cast<std::size_t>(t)];
    const float inv = 1.0f / static_cast<float>(protos.counts[static_cast<std::size_t>(y)]);
    float* dz = demb->p() + static_cast<std::size_t>(t) * d;
    const float* dpy = dproto.data() + static_cast<std::size_t>(y) * d;
    for (int i = 0; i < d; ++i) dz[i] += inv * dpy[i];
  }
  return out;
}

TrainLog train_episodic(const SystemConfig& cfg, long episodes, EmbedNet& net,
                        nn::Adam& opt) {
  cfg.validate();
  if (net.m_antennas != cfg.n_antennas)
    throw ConfigError("train_episodic: net antenna count mismatch");
  const PilotSchedule sched =
      PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots);
  const int n_classes = cfg.n_hypotheses();
  auto params = embednet_params(net);

  TrainLog log;
  log.episodes = episodes;
  net.zero_grad();
  long pending_queries = 0;
  double pending_loss = 0.0;
  long pending_episodes = 0;
  for (long ep = 0; ep < episodes; ++ep) {
    RngStream rng(cfg.seed, make_stream_id(stream_lane::kEmbedNetTrain, 0,
                                           static_cast<std::uint64_t>(ep)));
    const ChannelRealization ch = draw_channel(cfg, rng);
    const Frame frame = build_frame(cfg, ch, sched, rng);
    const nn::Tensor features = frame_features(frame);
    std::vector<int> labels(static_cast<std::size_t>(frame.t_len));
    for (int t = 0; t < frame.t_len; ++t)
      labels[static_cast<std::size_t>(t)] = frame.state_index(t);

    const nn::Tensor z = net.forward(features, /*train=*/true);
    nn::Tensor dz;
    const EpisodeLoss el =
        episode_loss(z, labels, frame.pilot_len, n_classes, &dz);
    net.backward(dz);
    pending_loss += el.loss;
    pending_episodes++;
    pending_queries += frame.t_len - frame.pilot_len;
    if (pending_queries >= 128) {  // batch quantum in query samples
      opt.step(params);
      net.zero_grad();
      log.losses.push_back(pending_loss / pending_episodes);
      pending_queries = 0;
      pending_loss = 0.0;
      pending_episodes = 0;
    }
  }
  if (pending_episodes > 0) {
    opt.step(params);
    net.zero_grad();
    log.losses.push_back(pending_loss / pending_episodes);
  }
  return log;
}

std::vector<std::uint8_t> detect_frame(const Frame& frame, EmbedNet& net) {
  if (net.m_antennas != frame.m_antennas)
    throw ConfigError("detect_frame: net antenna count mismatch");
  const int n_classes = 1 << frame.n_tags;
  const int p = frame.pilot_len;
  const int q_len = frame.t_len - p;
  const nn::Tensor features = frame_features(frame);
  const nn::Tensor z = net.forward(features, /*train=*/false);
  const int d = z.dim(1);

  nn::Tensor pilot_emb({p, d});
  std::copy_n(z.p(), static_cast<std::size_t>(p) * d, pilot_emb.p());
  std::vector<int> pilot_labels(static_cast<std::size_t>(p));
  for (int t = 0; t < p; ++t)
    pilot_labels[static_cast<std::size_t>(t)] = frame.state_index(t);
  const PrototypeSet protos = form_prototypes(pilot_emb, pilot_labels, n_classes);

  std::vector<std::uint8_t> bits(static_cast<std::size_t>(q_len) * frame.n_tags);
  for (int q = 0; q < q_len; ++q) {
    const int j = classify(z.p() + static_cast<std::size_t>(p + q) * d, protos);
    for (int i = 0; i < frame.n_tags; ++i)
      bits[static_cast<std::size_t>(q) * frame.n_tags + i] =
          static_cast<std::uint8_t>((j >> i) & 1);
  }
  return bits;
}

}  // namespace ambc
