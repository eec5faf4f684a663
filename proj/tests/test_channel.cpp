#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "ambc/channel.hpp"
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
  cfg.snr_db = 10.0;
  cfg.source = SourceKind::Qpsk;
  cfg.seed = 99;
  return cfg;
}

}  // namespace

TEST_CASE("effective channels: w0 = h and w3 = h + v1 + v2 exactly") {
  const SystemConfig cfg = base_config();
  RngStream rng(cfg.seed, 0);
  const ChannelRealization ch = draw_channel(cfg, rng);
  for (int a = 0; a < cfg.n_antennas; ++a) {
    CHECK(ch.w.at(0, a) == ch.h[a]);
    CHECK(ch.w.at(3, a) == ch.h[a] + ch.v.at(0, a) + ch.v.at(1, a));
    CHECK(ch.w.at(1, a) == ch.h[a] + ch.v.at(0, a));
    CHECK(ch.w.at(2, a) == ch.h[a] + ch.v.at(1, a));
  }
}

TEST_CASE("zero reflection collapses the hypothesis set") {
  SystemConfig cfg = base_config();
  cfg.n_tags = 1;
  cfg.zeta_db = {-std::numeric_limits<double>::infinity()};  // alpha = 0
  RngStream rng(5, 0);
  const ChannelRealization ch = draw_channel(cfg, rng);
  for (int a = 0; a < cfg.n_antennas; ++a) CHECK(ch.w.at(1, a) == ch.w.at(0, a));
}

TEST_CASE("backscatter power matches zeta for both channel models") {
  for (TagChannelModel model :
       {TagChannelModel::RayleighVector, TagChannelModel::ProductFg}) {
    SystemConfig cfg = base_config();
    cfg.tag_channel = model;
    RngStream rng(7, static_cast<std::uint64_t>(model));
    double v_power = 0.0, h_power = 0.0;
    const int draws = 100000;
    for (int it = 0; it < draws; ++it) {
      const ChannelRealization ch = draw_channel(cfg, rng);
      for (int a = 0; a < cfg.n_antennas; ++a) {
        h_power += std::norm(ch.h[a]);
        v_power += std::norm(ch.v.at(0, a));
      }
    }
    const double ratio = v_power / h_power;
    CHECK(ratio > 0.009);
    CHECK(ratio < 0.011);
  }
}

TEST_CASE("ambient sources: constellation structure and moments") {
  const AmbientSource qpsk = AmbientSource::make(SourceKind::Qpsk, 1.0);
  REQUIRE(qpsk.constellation.size() == 4);
  RngStream rng(3, 0);
  std::map<int, long> freq;
  const long draws = 1000000;
  const auto symbols = draw_ambient(qpsk, rng, static_cast<int>(draws));
  for (const cplx& s : symbols) {
    CHECK(std::abs(std::abs(s) - 1.0) < 1e-12);  // constant modulus
    for (int i = 0; i < 4; ++i)
      if (std::abs(s - qpsk.constellation[i]) < 1e-12) freq[i]++;
  }
  for (int i = 0; i < 4; ++i) {
    const double p = static_cast<double>(freq[i]) / draws;
    CHECK(p > 0.2475);
    CHECK(p < 0.2525);
  }

  const AmbientSource gauss = AmbientSource::make(SourceKind::GaussianSource, 1.0);
  double power = 0.0;
  const auto gs = draw_ambient(gauss, rng, 1000000);
  for (const cplx& s : gs) power += std::norm(s);
  power /= 1e6;
  CHECK(power > 0.995);
  CHECK(power < 1.005);

  const AmbientSource qam = AmbientSource::make(SourceKind::Qam16, 1.0);
  REQUIRE(qam.constellation.size() == 16);
  double avg = 0.0;
  for (const cplx& c : qam.constellation) avg += std::norm(c);
  CHECK(avg / 16.0 == doctest::Approx(1.0));

  CHECK(qpsk.var_s2() == doctest::Approx(0.0));
  CHECK(gauss.var_s2() == doctest::Approx(1.0));
  CHECK(qam.var_s2() == doctest::Approx(0.32));
}

TEST_CASE("empty constellation for a modulated source is an error") {
  AmbientSource src;
  src.kind = SourceKind::Qpsk;
  src.constellation.clear();
  RngStream rng(1, 0);
  CHECK_THROWS_AS((void)draw_ambient(src, rng, 4), ConfigError);
  CHECK_THROWS_AS((void)draw_ambient(AmbientSource::make(SourceKind::Qpsk, 1.0), rng, 0),
                  ConfigError);
}

TEST_CASE("pilot schedules: class balance and one-hot counts") {
  for (int n = 1; n <= 5; ++n) {
    const PilotSchedule cb = PilotSchedule::class_balanced(n, 32);
    std::vector<int> counts(1 << n, 0);
    for (int a : cb.assignments) counts[a]++;
    const int lo = 32 / (1 << n), hi = (32 + (1 << n) - 1) / (1 << n);
    for (int c : counts) {
      CHECK(c >= 1);
      CHECK(c >= lo);
      CHECK(c <= hi);
    }
  }
  CHECK_THROWS_AS((void)PilotSchedule::class_balanced(5, 31), ConfigError);

  const PilotSchedule oh = PilotSchedule::one_hot(2, 32);
  const auto counts = oh.one_hot_counts(2);
  CHECK(counts[0] == 12);  // floor(32/3) plus the remainder
  CHECK(counts[1] == 10);
  CHECK(counts[2] == 10);
  CHECK_THROWS_AS((void)PilotSchedule::one_hot(4, 4), ConfigError);
}

TEST_CASE("noiseless frames reconstruct w * s exactly") {
  SystemConfig cfg = base_config();
  cfg.snr_db = std::numeric_limits<double>::infinity();
  RngStream rng(cfg.seed, 1);
  const ChannelRealization ch = draw_channel(cfg, rng);
  const Frame fr = build_frame(
      cfg, ch, PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots), rng);
  for (int t = 0; t < fr.t_len; ++t) {
    const cplx* wrow = ch.w.row(fr.state_index(t));
    const cplx* block = fr.symbol_obs(t);
    for (int k = 0; k < fr.k_samples; ++k)
      for (int a = 0; a < fr.m_antennas; ++a)
        CHECK(block[k * fr.m_antennas + a] == wrow[a] * fr.ambient.at(t, k));
  }
}

TEST_CASE("one-hot pilot rows have at most one active tag") {
  SystemConfig cfg = base_config();
  RngStream rng(cfg.seed, 2);
  const ChannelRealization ch = draw_channel(cfg, rng);
  const Frame fr =
      build_frame(cfg, ch, PilotSchedule::one_hot(cfg.n_tags, cfg.n_pilots), rng);
  for (int t = 0; t < fr.pilot_len; ++t) {
    int ones = 0;
    for (int i = 0; i < fr.n_tags; ++i) ones += fr.state_row(t)[i];
    CHECK(ones <= 1);
  }
}

TEST_CASE("frame noise has the configured per-antenna variance") {
  SystemConfig cfg = base_config();
  cfg.snr_db = 3.0;
  const double expect = cfg.sigma_u_sq();
  RngStream rng(cfg.seed, 3);
  const ChannelRealization ch = draw_channel(cfg, rng);
  double acc = 0.0;
  long count = 0;
  for (int rep = 0; rep < 40; ++rep) {
    const Frame fr = build_frame(
        cfg, ch, PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots), rng);
    for (int t = 0; t < fr.t_len; ++t) {
      const cplx* wrow = ch.w.row(fr.state_index(t));
      const cplx* block = fr.symbol_obs(t);
      for (int k = 0; k < fr.k_samples; ++k) {
        for (int a = 0; a < fr.m_antennas; ++a) {
          acc += std::norm(block[k * fr.m_antennas + a] -
                           wrow[a] * fr.ambient.at(t, k));
          ++count;
        }
      }
    }
  }
  const double var = acc / static_cast<double>(count);
  CHECK(var > expect * 0.99);
  CHECK(var < expect * 1.01);
}

TEST_CASE("covariance expectation matches sigma_s^2 w w^H + sigma_u^2 I") {
  // fixed effective channel via a single reflection-free tag
  SystemConfig cfg = base_config();
  cfg.n_tags = 1;
  cfg.zeta_db = {-std::numeric_limits<double>::infinity()};
  cfg.source = SourceKind::GaussianSource;
  cfg.snr_db = 6.0;
  cfg.frame_len = 10032;
  cfg.n_pilots = 32;
  RngStream rng(cfg.seed, 4);
  const ChannelRealization ch = draw_channel(cfg, rng);
  const Frame fr = build_frame(
      cfg, ch, PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots), rng);
  const int m = cfg.n_antennas;
  std::vector<cplx> mean_r(m * m, cplx{0.0, 0.0});
  for (int t = 0; t < fr.t_len; ++t) {
    const cplx* block = fr.symbol_obs(t);
    for (int k = 0; k < fr.k_samples; ++k) {
      const cplx* x = block + k * m;
      for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) mean_r[a * m + b] += x[a] * std::conj(x[b]);
    }
  }
  const double scale = 1.0 / (static_cast<double>(fr.t_len) * fr.k_samples);
  double num = 0.0, den = 0.0;
  const double su = cfg.sigma_u_sq();
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      const cplx got = mean_r[a * m + b] * scale;
      cplx expect = ch.h[a] * std::conj(ch.h[b]) * cfg.sigma_s_sq;
      if (a == b) expect += su;
      num += std::norm(got - expect);
      den += std::norm(expect);
    }
  }
  CHECK(std::sqrt(num / den) < 0.02);
}

TEST_CASE("tag permutation permutes v rows and relabels w") {
  SystemConfig cfg = base_config();
  cfg.n_tags = 3;
  cfg.zeta_db = {-20.0, -14.0, -8.0};
  RngStream rng(17, 0);
  const ChannelRealization ch = draw_channel(cfg, rng);
  // permutation pi: tag i of the permuted system is tag perm[i] of the original
  const int perm[3] = {2, 0, 1};
  ChannelRealization permuted = ch;
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < cfg.n_antennas; ++a)
      permuted.v.at(i, a) = ch.v.at(perm[i], a);
  // rebuild w from the permuted v and compare against relabeled originals
  for (int j = 0; j < 8; ++j) {
    int j_orig = 0;
    for (int i = 0; i < 3; ++i)
      if ((j >> i) & 1) j_orig |= 1 << perm[i];
    for (int a = 0; a < cfg.n_antennas; ++a) {
      cplx expect = ch.h[a];
      for (int i = 0; i < 3; ++i)
        if ((j >> i) & 1) expect += permuted.v.at(i, a);
      CHECK(std::abs(expect - ch.w.at(j_orig, a)) < 1e-12);
    }
  }
}

TEST_CASE("frames are deterministic per (config, stream)") {
  const SystemConfig cfg = base_config();
  RngStream r1(cfg.seed, 8), r2(cfg.seed, 8);
  const ChannelRealization c1 = draw_channel(cfg, r1);
  const ChannelRealization c2 = draw_channel(cfg, r2);
  const PilotSchedule sched = PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots);
  const Frame f1 = build_frame(cfg, c1, sched, r1);
  const Frame f2 = build_frame(cfg, c2, sched, r2);
  CHECK(f1.states == f2.states);
  CHECK(f1.obs == f2.obs);
  CHECK(f1.ambient.a == f2.ambient.a);
}

TEST_CASE("frame dump: header layout and round trip") {
  SystemConfig cfg = base_config();
  cfg.frame_len = 12;
  cfg.n_pilots = 4;
  RngStream rng(cfg.seed, 9);
  const ChannelRealization ch = draw_channel(cfg, rng);
  const Frame fr = build_frame(
      cfg, ch, PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots), rng);
  const std::string path = "frame_dump_test.bin";
  write_frame_dump(path, fr);

  // header: magic + five u32 fields
  std::FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  char head[28];
  REQUIRE(std::fread(head, 1, 28, f) == 28);
  std::fclose(f);
  CHECK(std::string(head, 8) == "AMBCFRM1");
  const auto u32at = [&](int off) {
    return static_cast<unsigned>(static_cast<unsigned char>(head[off])) |
           (static_cast<unsigned>(static_cast<unsigned char>(head[off + 1])) << 8) |
           (static_cast<unsigned>(static_cast<unsigned char>(head[off + 2])) << 16) |
           (static_cast<unsigned>(static_cast<unsigned char>(head[off + 3])) << 24);
  };
  CHECK(u32at(8) == 2u);    // N
  CHECK(u32at(12) == 4u);   // M
  CHECK(u32at(16) == 20u);  // K
  CHECK(u32at(20) == 12u);  // T
  CHECK(u32at(24) == 4u);   // P

  const Frame back = read_frame_dump(path);
  CHECK(back.t_len == fr.t_len);
  CHECK(back.k_samples == fr.k_samples);
  CHECK(back.m_antennas == fr.m_antennas);
  // payload is float32; compare against the float-cast original
  for (int t = 0; t < fr.t_len; ++t)
    for (int k = 0; k < fr.k_samples; ++k) {
      CHECK(back.ambient.at(t, k).real() ==
            static_cast<float>(fr.ambient.at(t, k).real()));
      for (int a = 0; a < fr.m_antennas; ++a) {
        const cplx orig = fr.symbol_obs(t)[k * fr.m_antennas + a];
        const cplx rt = back.symbol_obs(t)[k * fr.m_antennas + a];
        CHECK(rt.real() == static_cast<float>(orig.real()));
        CHECK(rt.imag() == static_cast<float>(orig.imag()));
      }
    }
  std::filesystem::remove(path);
}

TEST_CASE("schedule and config mismatches are errors") {
  SystemConfig cfg = base_config();
  RngStream rng(cfg.seed, 10);
  const ChannelRealization ch = draw_channel(cfg, rng);
  const PilotSchedule wrong = PilotSchedule::class_balanced(cfg.n_tags, 16);
  CHECK_THROWS_AS((void)build_frame(cfg, ch, wrong, rng), ConfigError);

  SystemConfig other = cfg;
  other.n_antennas = 2;
  CHECK_THROWS_AS(
      (void)build_frame(other, ch,
                        PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots), rng),
      ConfigError);
}
