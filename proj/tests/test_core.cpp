#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <complex>
#include <set>

#include "ambc/core.hpp"
#include "doctest.h"

using namespace ambc;

TEST_CASE("hypothesis encoding round-trips for N <= 5") {
  for (int n = 1; n <= 5; ++n) {
    for (int j = 0; j < (1 << n); ++j) {
      const Hypothesis h = Hypothesis::from_index(j, n);
      CHECK(static_cast<int>(h.bits.size()) == n);
      CHECK(hypothesis_from_states(h.bits).index == j);
    }
  }
}

TEST_CASE("hypothesis examples and bit order") {
  CHECK(hypothesis_from_states({0, 0}).index == 0);
  // LSB is tag 1: states (1,0,1) -> 1 + 4
  CHECK(hypothesis_from_states({1, 0, 1}).index == 5);
  CHECK_THROWS_AS((void)hypothesis_from_states({}), ConfigError);
  CHECK_THROWS_AS((void)hypothesis_from_states({0, 2}), ConfigError);
  CHECK_THROWS_AS((void)Hypothesis::from_index(4, 2), ConfigError);
}

TEST_CASE("hamming distance equals differing tag bits, exhaustive N <= 5") {
  for (int n = 1; n <= 5; ++n) {
    for (int j = 0; j < (1 << n); ++j) {
      const Hypothesis hj = Hypothesis::from_index(j, n);
      for (int l = 0; l < (1 << n); ++l) {
        const Hypothesis hl = Hypothesis::from_index(l, n);
        int diff = 0;
        for (int i = 0; i < n; ++i) diff += hj.bits[i] != hl.bits[i];
        CHECK(hamming_distance(j, l) == diff);
      }
    }
  }
}

TEST_CASE("rng streams are deterministic and stream-separated") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    all_equal &= x == b.next_u64();
    any_diff |= x != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("complex gaussian draws are byte-identical for a fixed stream") {
  RngStream a(9, 3), b(9, 3);
  for (int i = 0; i < 100; ++i) {
    const cplx za = a.next_cgaussian(1.0);
    const cplx zb = b.next_cgaussian(1.0);
    CHECK(za.real() == zb.real());
    CHECK(za.imag() == zb.imag());
  }
}

TEST_CASE("circular gaussian sampling: per-component power within 0.5%") {
  RngStream rng(1, 0);
  const int dim = 4;
  const long draws = 250000;  // 10^6 components total
  double power = 0.0;
  for (long i = 0; i < draws; ++i) {
    const auto v = sample_circular_gaussian(rng, dim, 1.0);
    for (const cplx& z : v) power += std::norm(z);
  }
  power /= static_cast<double>(draws * dim);
  CHECK(power > 0.995);
  CHECK(power < 1.005);
}

TEST_CASE("circular gaussian sampling: empirical covariance near identity") {
  RngStream rng(2, 0);
  const int dim = 4;
  const long draws = 250000;
  // accumulate E[x x^H]
  std::vector<cplx> cov(dim * dim, cplx{0.0, 0.0});
  for (long i = 0; i < draws; ++i) {
    const auto v = sample_circular_gaussian(rng, dim, 1.0);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b) cov[a * dim + b] += v[a] * std::conj(v[b]);
  }
  double num = 0.0, den = 0.0;
  for (int a = 0; a < dim; ++a) {
    for (int b = 0; b < dim; ++b) {
      const cplx c = cov[a * dim + b] / static_cast<double>(draws);
      const cplx expect = a == b ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
      num += std::norm(c - expect);
      den += std::norm(expect);
    }
  }
  CHECK(std::sqrt(num / den) < 0.01);  // relative Frobenius
}

TEST_CASE("degenerate sampling inputs are configuration errors") {
  RngStream rng(1, 1);
  CHECK_THROWS_AS((void)sample_circular_gaussian(rng, 4, 0.0), ConfigError);
  CHECK_THROWS_AS((void)sample_circular_gaussian(rng, 4, -1.0), ConfigError);
  CHECK_THROWS_AS((void)sample_circular_gaussian(rng, 0, 1.0), ConfigError);
}

TEST_CASE("system config validation names bad fields") {
  SystemConfig cfg;
  cfg.validate();
  CHECK(cfg.sigma_u_sq() == doctest::Approx(1.0));  // snr 0 dB
  cfg.snr_db = 10.0;
  CHECK(cfg.sigma_u_sq() == doctest::Approx(0.1));
  cfg.snr_db = std::numeric_limits<double>::infinity();
  CHECK(cfg.sigma_u_sq() == 0.0);

  SystemConfig bad = cfg;
  bad.n_pilots = bad.frame_len;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.zeta_db = {-20.0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.sigma_s_sq = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.n_tags = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("alpha and zeta relationship") {
  SystemConfig cfg;
  cfg.set_uniform_zeta(-20.0);
  CHECK(cfg.alpha(0) == doctest::Approx(0.1));
  cfg.set_uniform_zeta(0.0);
  CHECK(cfg.alpha(1) == doctest::Approx(1.0));
}

TEST_CASE("stream ids are distinct across lanes, points and trials") {
  std::set<std::uint64_t> ids;
  for (std::uint64_t lane : {0ull, 1ull, 21ull})
    for (std::uint64_t point : {0ull, 5ull})
      for (std::uint64_t trial : {0ull, 1ull, 99999ull})
        ids.insert(make_stream_id(lane, point, trial));
  CHECK(ids.size() == 18);
}
