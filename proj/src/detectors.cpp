#include "ambc/detectors.hpp"

#include <cmath>

#include "ambc/simd.hpp"

namespace ambc {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

int argmax_lowest(const std::vector<double>& values) {
  int best = 0;
  for (int j = 1; j < static_cast<int>(values.size()); ++j)
    if (values[static_cast<std::size_t>(j)] > values[static_cast<std::size_t>(best)])
      best = j;
  return best;
}

GaussianLrtCache GaussianLrtCache::build(const CMatrix& w, double sigma_s_sq,
                                         double sigma_u_sq) {
  if (!(sigma_u_sq > 0.0))
    throw ConfigError("GaussianLrtCache: sigma_u_sq must be > 0");
  if (!(sigma_s_sq > 0.0))
    throw ConfigError("GaussianLrtCache: sigma_s_sq must be > 0");
  GaussianLrtCache c;
  const int nh = w.rows;
  const int m = w.cols;
  c.m_antennas = m;
  c.sigma_s_sq = sigma_s_sq;
  c.sigma_u_sq = sigma_u_sq;
  c.w = w;
  c.inv_noise = 1.0 / sigma_u_sq;
  c.sigma.reserve(static_cast<std::size_t>(nh));
  c.sigma_inv.reserve(static_cast<std::size_t>(nh));
  c.log_det.resize(static_cast<std::size_t>(nh));
  c.rank1_coef.resize(static_cast<std::size_t>(nh));
  for (int j = 0; j < nh; ++j) {
    const cplx* wj = w.row(j);
    double wnorm = 0.0;
    for (int a = 0; a < m; ++a) wnorm += std::norm(wj[a]);
    const double denom = sigma_u_sq + sigma_s_sq * wnorm;
    const double b = sigma_s_sq / (sigma_u_sq * denom);
    c.rank1_coef[static_cast<std::size_t>(j)] = b;
    // det(sigma_u^2 I + sigma_s^2 w w^H) = sigma_u^(2(M-1)) * denom
    c.log_det[static_cast<std::size_t>(j)] =
        (m - 1) * std::log(sigma_u_sq) + std::log(denom);
    CMatrix sig(m, m), inv(m, m);
    for (int r = 0; r < m; ++r) {
      for (int col = 0; col < m; ++col) {
        const cplx outer = wj[r] * std::conj(wj[col]);
        sig.at(r, col) = sigma_s_sq * outer;
        inv.at(r, col) = -b * outer;
      }
      sig.at(r, r) += sigma_u_sq;
      inv.at(r, r) += c.inv_noise;
    }
    c.sigma.push_back(std::move(sig));
    c.sigma_inv.push_back(std::move(inv));
  }
  return c;
}

LrtDecision lrt_gaussian(const cplx* obs, int k_samples,
                         const GaussianLrtCache& cache) {
  if (k_samples < 1) throw ConfigError("lrt_gaussian: k_samples must be >= 1");
  const int nh = cache.w.rows;
  const int m = cache.m_antennas;
  const double kd = static_cast<double>(k_samples);
  // total energy is common to all hypotheses but kept so the reported
  // log-likelihoods are the actual values, not just argmax-equivalent
  const double energy =
      simd::sumsq_f64(reinterpret_cast<const double*>(obs),
                      static_cast<std::size_t>(k_samples) * m * 2);
  LrtDecision d;
  d.log_likelihoods.resize(static_cast<std::size_t>(nh));
  for (int j = 0; j < nh; ++j) {
    const double quad_w = simd::cdotc_rows_normsq(
        obs, cache.w.row(j), static_cast<std::size_t>(k_samples),
        static_cast<std::size_t>(m));
    const double quad = cache.inv_noise * energy -
                        cache.rank1_coef[static_cast<std::size_t>(j)] * quad_w;
    d.log_likelihoods[static_cast<std::size_t>(j)] =
        -kd * (m * std::log(kPi) + cache.log_det[static_cast<std::size_t>(j)]) -
        quad;
  }
  const int n_tags = [&] {
    int n = 0;
    while ((1 << n) < nh) ++n;
    return n;
  }();
  d.chosen = Hypothesis::from_index(argmax_lowest(d.log_likelihoods), n_tags);
  return d;
}

LrtDecision lrt_constellation(const cplx* obs, const cplx* ambient,
                              int k_samples, const CMatrix& w,
                              double sigma_u_sq) {
  if (k_samples < 1)
    throw ConfigError("lrt_constellation: k_samples must be >= 1");
  if (!(sigma_u_sq > 0.0))
    throw ConfigError("lrt_constellation: sigma_u_sq must be > 0");
  const int nh = w.rows;
  const int m = w.cols;
  const double kd = static_cast<double>(k_samples);

  // sum_k |x_k - w s_k|^2 = E - 2 Re(w^H y) + S2 |w|^2 with
  // y = sum_k conj(s_k) x_k and S2 = sum_k |s_k|^2.
  const double energy =
      simd::sumsq_f64(reinterpret_cast<const double*>(obs),
                      static_cast<std::size_t>(k_samples) * m * 2);
  std::vector<cplx> y(static_cast<std::size_t>(m), cplx{0.0, 0.0});
  double s2 = 0.0;
  for (int kk = 0; kk < k_samples; ++kk) {
    const cplx s = ambient[kk];
    s2 += std::norm(s);
    simd::caxpy(y.data(), obs + static_cast<std::size_t>(kk) * m, std::conj(s),
                static_cast<std::size_t>(m));
  }
  const double base = -kd * m * std::log(kPi * sigma_u_sq);
  LrtDecision d;
  d.log_likelihoods.resize(static_cast<std::size_t>(nh));
  for (int j = 0; j < nh; ++j) {
    const cplx* wj = w.row(j);
    const cplx wy = simd::cdotc(wj, y.data(), static_cast<std::size_t>(m));
    double wnorm = 0.0;
    for (int a = 0; a < m; ++a) wnorm += std::norm(wj[a]);
    const double residual = energy - 2.0 * wy.real() + s2 * wnorm;
    d.log_likelihoods[static_cast<std::size_t>(j)] = base - residual / sigma_u_sq;
  }
  const int n_tags = [&] {
    int n = 0;
    while ((1 << n) < nh) ++n;
    return n;
  }();
  d.chosen = Hypothesis::from_index(argmax_lowest(d.log_likelihoods), n_tags);
  return d;
}

namespace {
EnergyStats build_energy_stats(const CMatrix& w, double sigma_s_sq,
                               double var_s2, double sigma_u_sq,
                               int k_samples) {
  if (k_samples < 1) throw ConfigError("EnergyStats: k_samples must be >= 1");
  EnergyStats st;
  st.m_antennas = w.cols;
  st.k_samples = k_samples;
  const int nh = w.rows;
  st.delta.resize(static_cast<std::size_t>(nh));
  st.gamma_sq.resize(static_cast<std::size_t>(nh));
  for (int j = 0; j < nh; ++j) {
    const cplx* wj = w.row(j);
    double wnorm = 0.0;
    for (int a = 0; a < w.cols; ++a) wnorm += std::norm(wj[a]);
    st.delta[static_cast<std::size_t>(j)] =
        sigma_s_sq * wnorm + w.cols * sigma_u_sq;
    st.gamma_sq[static_cast<std::size_t>(j)] =
        (var_s2 * wnorm * wnorm + 2.0 * sigma_s_sq * sigma_u_sq * wnorm +
         w.cols * sigma_u_sq * sigma_u_sq) /
        k_samples;
  }
  return st;
}
}  // namespace

EnergyStats EnergyStats::build(const CMatrix& w, double sigma_s_sq,
                               double sigma_u_sq, int k_samples) {
  return build_energy_stats(w, sigma_s_sq, sigma_s_sq * sigma_s_sq, sigma_u_sq,
                            k_samples);
}

EnergyStats EnergyStats::build_for_source(const CMatrix& w,
                                          const AmbientSource& src,
                                          double sigma_u_sq, int k_samples) {
  return build_energy_stats(w, src.sigma_s_sq, src.var_s2(), sigma_u_sq,
                            k_samples);
}

double symbol_energy(const cplx* obs, int k_samples, int m_antennas) {
  return simd::sumsq_f64(reinterpret_cast<const double*>(obs),
                         static_cast<std::size_t>(k_samples) * m_antennas * 2) /
         k_samples;
}

LrtDecision energy_detect(const cplx* obs, int k_samples,
                          const EnergyStats& stats) {
  const double e = symbol_energy(obs, k_samples, stats.m_antennas);
  const int nh = static_cast<int>(stats.delta.size());
  LrtDecision d;
  d.log_likelihoods.resize(static_cast<std::size_t>(nh));
  for (int j = 0; j < nh; ++j) {
    const double g2 = stats.gamma_sq[static_cast<std::size_t>(j)];
    const double diff = e - stats.delta[static_cast<std::size_t>(j)];
    d.log_likelihoods[static_cast<std::size_t>(j)] =
        -0.5 * std::log(2.0 * kPi * g2) - diff * diff / (2.0 * g2);
  }
  const int n_tags = [&] {
    int n = 0;
    while ((1 << n) < nh) ++n;
    return n;
  }();
  d.chosen = Hypothesis::from_index(argmax_lowest(d.log_likelihoods), n_tags);
  return d;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

namespace {
double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
}  // namespace

double pep_union_bound(const PepBoundParams& p) {
  if (p.delta0 < 0.0) throw ConfigError("pep bound: delta0 must be >= 0");
  const double snr_lin = p.k_samples * p.sigma_s_sq / p.sigma_u_sq;
  double total = 0.0;
  for (int d = 1; d <= p.n_tags; ++d)
    total += binomial(p.n_tags, d) * q_function(std::sqrt(snr_lin * d * p.delta0));
  return total;
}

double pep_chernoff_bound(const PepBoundParams& p) {
  if (p.delta0 < 0.0) throw ConfigError("pep bound: delta0 must be >= 0");
  const double snr_lin = p.k_samples * p.sigma_s_sq / p.sigma_u_sq;
  double total = 0.0;
  for (int d = 1; d <= p.n_tags; ++d)
    total += binomial(p.n_tags, d) * std::exp(-0.5 * snr_lin * d * p.delta0);
  return 0.5 * total;
}

double estimate_delta0(const SystemConfig& cfg, RngStream& rng, int n_draws) {
  if (n_draws < 1) throw ConfigError("estimate_delta0: n_draws must be >= 1");
  double acc = 0.0;
  for (int it = 0; it < n_draws; ++it) {
    const ChannelRealization ch = draw_channel(cfg, rng);
    for (int i = 0; i < cfg.n_tags; ++i) {
      const cplx* vrow = ch.v.row(i);
      for (int a = 0; a < cfg.n_antennas; ++a) acc += std::norm(vrow[a]);
    }
  }
  return acc / (static_cast<double>(n_draws) * cfg.n_tags);
}

}  // namespace ambc
