#include "ambc/channel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace ambc {

ChannelRealization draw_channel(const SystemConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int n = cfg.n_tags;
  const int m = cfg.n_antennas;
  ChannelRealization ch;
  ch.n_tags = n;
  ch.m_antennas = m;
  ch.h = sample_circular_gaussian(rng, m, 1.0);
  ch.f.resize(static_cast<std::size_t>(n));
  ch.g = CMatrix(n, m);
  ch.v = CMatrix(n, m);
  const bool product = cfg.tag_channel == TagChannelModel::ProductFg;
  for (int i = 0; i < n; ++i) {
    ch.f[static_cast<std::size_t>(i)] =
        product ? rng.next_cgaussian(1.0) : cplx{1.0, 0.0};
    const double alpha = cfg.alpha(i);
    cplx* grow = ch.g.row(i);
    cplx* vrow = ch.v.row(i);
    for (int a = 0; a < m; ++a) {
      grow[a] = rng.next_cgaussian(1.0);
      vrow[a] = alpha * ch.f[static_cast<std::size_t>(i)] * grow[a];
    }
  }
  const int nh = cfg.n_hypotheses();
  ch.w = CMatrix(nh, m);
  for (int j = 0; j < nh; ++j) {
    cplx* wrow = ch.w.row(j);
    for (int a = 0; a < m; ++a) wrow[a] = ch.h[static_cast<std::size_t>(a)];
    for (int i = 0; i < n; ++i) {
      if ((j >> i) & 1) {
        const cplx* vrow = ch.v.row(i);
        for (int a = 0; a < m; ++a) wrow[a] += vrow[a];
      }
    }
  }
  return ch;
}

AmbientSource AmbientSource::make(SourceKind kind, double sigma_s_sq) {
  if (!(sigma_s_sq > 0.0))
    throw ConfigError("AmbientSource: sigma_s_sq must be > 0");
  AmbientSource src;
  src.kind = kind;
  src.sigma_s_sq = sigma_s_sq;
  const double scale = std::sqrt(sigma_s_sq);
  switch (kind) {
    case SourceKind::GaussianSource:
      break;
    case SourceKind::Qpsk: {
      const double a = scale / std::sqrt(2.0);
      src.constellation = {{a, a}, {-a, a}, {-a, -a}, {a, -a}};
      break;
    }
    case SourceKind::Qam16: {
      // {±1, ±3}^2 grid normalized to unit average power.
      const double a = scale / std::sqrt(10.0);
      for (int re = -3; re <= 3; re += 2)
        for (int im = -3; im <= 3; im += 2)
          src.constellation.push_back({a * re, a * im});
      break;
    }
  }
  return src;
}

double AmbientSource::var_s2() const {
  if (kind == SourceKind::GaussianSource) return sigma_s_sq * sigma_s_sq;
  double m4 = 0.0;
  for (const cplx& c : constellation) m4 += std::norm(c) * std::norm(c);
  m4 /= static_cast<double>(constellation.size());
  return m4 - sigma_s_sq * sigma_s_sq;
}

std::vector<cplx> draw_ambient(const AmbientSource& src, RngStream& rng,
                               int count) {
  if (count < 1) throw ConfigError("draw_ambient: count must be >= 1");
  std::vector<cplx> out(static_cast<std::size_t>(count));
  if (src.kind == SourceKind::GaussianSource) {
    for (auto& s : out) s = rng.next_cgaussian(src.sigma_s_sq);
    return out;
  }
  if (src.constellation.empty())
    throw ConfigError("draw_ambient: modulated source with empty constellation");
  const std::uint64_t csize = src.constellation.size();
  for (auto& s : out) s = src.constellation[rng.next_below(csize)];
  return out;
}

PilotSchedule PilotSchedule::class_balanced(int n_tags, int n_pilots) {
  const int nh = 1 << n_tags;
  if (n_pilots < nh)
    throw ConfigError("class-balanced schedule needs P >= 2^N pilots, got P=" +
                      std::to_string(n_pilots) + " for N=" + std::to_string(n_tags));
  PilotSchedule s;
  s.kind = ScheduleKind::ClassBalanced;
  s.assignments.resize(static_cast<std::size_t>(n_pilots));
  for (int t = 0; t < n_pilots; ++t)
    s.assignments[static_cast<std::size_t>(t)] = t % nh;
  return s;
}

PilotSchedule PilotSchedule::one_hot(int n_tags, int n_pilots) {
  if (n_pilots < n_tags + 1)
    throw ConfigError("one-hot schedule needs P >= N+1 pilots, got P=" +
                      std::to_string(n_pilots) + " for N=" + std::to_string(n_tags));
  PilotSchedule s;
  s.kind = ScheduleKind::OneHot;
  s.assignments.reserve(static_cast<std::size_t>(n_pilots));
  const int cycles = n_pilots / (n_tags + 1);
  for (int c = 0; c < cycles; ++c)
    for (int i = 0; i <= n_tags; ++i) s.assignments.push_back(i);
  // Remainder goes to the all-off configuration: the direct channel
  // dominates every hypothesis and benefits most from extra averaging.
  while (static_cast<int>(s.assignments.size()) < n_pilots)
    s.assignments.push_back(0);
  return s;
}

std::vector<int> PilotSchedule::one_hot_counts(int n_tags) const {
  if (kind != ScheduleKind::OneHot)
    throw UsageError("one_hot_counts on a non-one-hot schedule");
  std::vector<int> counts(static_cast<std::size_t>(n_tags) + 1, 0);
  for (int a : assignments) counts.at(static_cast<std::size_t>(a))++;
  return counts;
}

Frame build_frame(const SystemConfig& cfg, const ChannelRealization& ch,
                  const PilotSchedule& sched, RngStream& rng) {
  cfg.validate();
  if (ch.n_tags != cfg.n_tags || ch.m_antennas != cfg.n_antennas)
    throw ConfigError("build_frame: channel dimensions do not match config");
  if (static_cast<int>(sched.assignments.size()) != cfg.n_pilots)
    throw ConfigError("build_frame: schedule length " +
                      std::to_string(sched.assignments.size()) +
                      " != n_pilots " + std::to_string(cfg.n_pilots));

  const int n = cfg.n_tags, m = cfg.n_antennas, k = cfg.str_samples;
  const int t_len = cfg.frame_len, p = cfg.n_pilots;
  const int nh = cfg.n_hypotheses();

  Frame fr;
  fr.t_len = t_len;
  fr.pilot_len = p;
  fr.k_samples = k;
  fr.m_antennas = m;
  fr.n_tags = n;
  fr.channel = ch;
  fr.states.assign(static_cast<std::size_t>(t_len) * n, 0);

  // Pilot states. Class-balanced order is re-shuffled each frame so pilot
  // positions vary across episodes; one-hot blocks stay in place.
  std::vector<int> assign = sched.assignments;
  if (sched.kind == ScheduleKind::ClassBalanced) {
    rng.shuffle(assign);
    for (int t = 0; t < p; ++t) {
      const int j = assign[static_cast<std::size_t>(t)];
      if (j < 0 || j >= nh) throw ConfigError("pilot class out of range");
      for (int i = 0; i < n; ++i)
        fr.states[static_cast<std::size_t>(t) * n + i] =
            static_cast<std::uint8_t>((j >> i) & 1);
    }
  } else {
    for (int t = 0; t < p; ++t) {
      const int conf = assign[static_cast<std::size_t>(t)];
      if (conf < 0 || conf > n) throw ConfigError("pilot configuration out of range");
      if (conf > 0) fr.states[static_cast<std::size_t>(t) * n + (conf - 1)] = 1;
    }
  }
  // Data states: i.i.d. uniform bits, row-major.
  for (int t = p; t < t_len; ++t)
    for (int i = 0; i < n; ++i)
      fr.states[static_cast<std::size_t>(t) * n + i] =
          static_cast<std::uint8_t>(rng.next_bit());

  // Ambient symbols for the whole frame.
  const AmbientSource src = AmbientSource::make(cfg.source, cfg.sigma_s_sq);
  fr.ambient = CMatrix(t_len, k);
  {
    std::vector<cplx> all = draw_ambient(src, rng, t_len * k);
    fr.ambient.a = std::move(all);
  }

  // Observations: x_k = w_j s_k + u_k per sample.
  const double sigma_u_sq = cfg.sigma_u_sq();
  fr.obs.resize(static_cast<std::size_t>(t_len) * k * m);
  for (int t = 0; t < t_len; ++t) {
    const cplx* wrow = ch.w.row(fr.state_index(t));
    const cplx* srow = fr.ambient.row(t);
    cplx* orow = fr.obs.data() + static_cast<std::size_t>(t) * k * m;
    for (int kk = 0; kk < k; ++kk) {
      const cplx s = srow[kk];
      cplx* xk = orow + static_cast<std::size_t>(kk) * m;
      if (sigma_u_sq > 0.0) {
        for (int a = 0; a < m; ++a)
          xk[a] = wrow[a] * s + rng.next_cgaussian(sigma_u_sq);
      } else {
        for (int a = 0; a < m; ++a) xk[a] = wrow[a] * s;
      }
    }
  }
  return fr;
}

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw std::runtime_error("frame dump truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_c64(std::ofstream& os, cplx z) {
  const float re = static_cast<float>(z.real());
  const float im = static_cast<float>(z.imag());
  os.write(reinterpret_cast<const char*>(&re), 4);
  os.write(reinterpret_cast<const char*>(&im), 4);
}

cplx get_c64(std::ifstream& is) {
  float re = 0.0f, im = 0.0f;
  is.read(reinterpret_cast<char*>(&re), 4);
  is.read(reinterpret_cast<char*>(&im), 4);
  if (!is) throw std::runtime_error("frame dump truncated");
  return {re, im};
}

constexpr char kFrameMagic[8] = {'A', 'M', 'B', 'C', 'F', 'R', 'M', '1'};

}  // namespace

void write_frame_dump(const std::string& path, const Frame& frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open frame dump for writing: " + path);
  os.write(kFrameMagic, 8);
  put_u32(os, static_cast<std::uint32_t>(frame.n_tags));
  put_u32(os, static_cast<std::uint32_t>(frame.m_antennas));
  put_u32(os, static_cast<std::uint32_t>(frame.k_samples));
  put_u32(os, static_cast<std::uint32_t>(frame.t_len));
  put_u32(os, static_cast<std::uint32_t>(frame.pilot_len));
  for (int t = 0; t < frame.t_len; ++t)
    for (int kk = 0; kk < frame.k_samples; ++kk)
      put_c64(os, frame.ambient.at(t, kk));
  // obs written in the external T x M x K order.
  for (int t = 0; t < frame.t_len; ++t) {
    const cplx* block = frame.symbol_obs(t);  // K x M internally
    for (int a = 0; a < frame.m_antennas; ++a)
      for (int kk = 0; kk < frame.k_samples; ++kk)
        put_c64(os, block[static_cast<std::size_t>(kk) * frame.m_antennas + a]);
  }
  if (!os) throw std::runtime_error("frame dump write failed: " + path);
}

Frame read_frame_dump(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open frame dump: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kFrameMagic, 8) != 0)
    throw std::runtime_error("frame dump magic mismatch: " + path);
  Frame fr;
  fr.n_tags = static_cast<int>(get_u32(is));
  fr.m_antennas = static_cast<int>(get_u32(is));
  fr.k_samples = static_cast<int>(get_u32(is));
  fr.t_len = static_cast<int>(get_u32(is));
  fr.pilot_len = static_cast<int>(get_u32(is));
  fr.ambient = CMatrix(fr.t_len, fr.k_samples);
  for (int t = 0; t < fr.t_len; ++t)
    for (int kk = 0; kk < fr.k_samples; ++kk) fr.ambient.at(t, kk) = get_c64(is);
  fr.obs.resize(static_cast<std::size_t>(fr.t_len) * fr.k_samples * fr.m_antennas);
  for (int t = 0; t < fr.t_len; ++t) {
    cplx* block = fr.obs.data() +
                  static_cast<std::size_t>(t) * fr.k_samples * fr.m_antennas;
    for (int a = 0; a < fr.m_antennas; ++a)
      for (int kk = 0; kk < fr.k_samples; ++kk)
        block[static_cast<std::size_t>(kk) * fr.m_antennas + a] = get_c64(is);
  }
  return fr;
}

}  // namespace ambc
