#pragma once

// Perfect-CSI benchmarks and analytical bounds: the 2^N-hypothesis LRT for
// Gaussian and constellation ambient sources, the energy detector, and the
// pairwise-error-probability union/Chernoff bounds.

#include <vector>

#include "ambc/channel.hpp"
#include "ambc/core.hpp"

namespace ambc {

struct LrtDecision {
  Hypothesis chosen;
  std::vector<double> log_likelihoods;  // one entry per hypothesis
};

/// argmax with deterministic lowest-index tie break.
int argmax_lowest(const std::vector<double>& values);

/// Per-hypothesis covariance model for the Gaussian-source LRT:
/// Sigma_j = sigma_s^2 w_j w_j^H + sigma_u^2 I. The rank-1 structure gives
/// the inverse and log-determinant in closed form (Sherman-Morrison /
/// matrix-determinant lemma); the explicit matrices are kept for inspection
/// and for the generic-path oracle tests.
struct GaussianLrtCache {
  int m_antennas = 0;
  double sigma_s_sq = 0.0;
  double sigma_u_sq = 0.0;
  CMatrix w;                        // 2^N x M effective channels
  std::vector<CMatrix> sigma;       // per hypothesis
  std::vector<CMatrix> sigma_inv;   // per hypothesis
  std::vector<double> log_det;      // log det Sigma_j
  // fast-path coefficients: x^H Sigma^-1 x = a*|x|^2 - b_j*|w_j^H x|^2
  double inv_noise = 0.0;           // a = 1/sigma_u^2
  std::vector<double> rank1_coef;   // b_j

  static GaussianLrtCache build(const CMatrix& w, double sigma_s_sq,
                                double sigma_u_sq);
};

/// L_j = -K(M log pi + log det Sigma_j) - sum_k x_k^H Sigma_j^-1 x_k over a
/// K x M observation block; chosen = argmax.
LrtDecision lrt_gaussian(const cplx* obs, int k_samples,
                         const GaussianLrtCache& cache);

/// Modulated-source LRT with known ambient symbols:
/// L_j = -K M log(pi sigma_u^2) - (1/sigma_u^2) sum_k |x_k - w_j s_k|^2.
LrtDecision lrt_constellation(const cplx* obs, const cplx* ambient,
                              int k_samples, const CMatrix& w,
                              double sigma_u_sq);

/// Gaussian approximation of the per-symbol average energy
/// E = (1/K) sum_k |x_k|^2 under each hypothesis:
/// mean  delta_j  = sigma_s^2 |w_j|^2 + M sigma_u^2
/// var   gamma_j^2 = (sigma_s^4 |w_j|^4 + 2 sigma_s^2 sigma_u^2 |w_j|^2
///                   + M sigma_u^4) / K
struct EnergyStats {
  int m_antennas = 0;
  int k_samples = 0;
  std::vector<double> delta;
  std::vector<double> gamma_sq;

  /// The formulas above, with the sigma_s^4 |w|^4 term that is exact for a
  /// Gaussian ambient source.
  static EnergyStats build(const CMatrix& w, double sigma_s_sq,
                           double sigma_u_sq, int k_samples);

  /// Same mean, but the |w|^4 variance term uses the actual Var(|s|^2) of
  /// the source (0 for constant-modulus constellations). Matching the source
  /// statistics is what makes ED usable under QPSK at high SNR.
  static EnergyStats build_for_source(const CMatrix& w,
                                      const AmbientSource& src,
                                      double sigma_u_sq, int k_samples);
};

/// Average observed energy of one tag symbol.
double symbol_energy(const cplx* obs, int k_samples, int m_antennas);

/// Picks the hypothesis maximizing the scalar Gaussian likelihood of the
/// observed energy.
LrtDecision energy_detect(const cplx* obs, int k_samples,
                          const EnergyStats& stats);

struct PepBoundParams {
  double delta0 = 0.0;  // per-tag squared effective channel separation
  int k_samples = 0;
  double sigma_s_sq = 1.0;
  double sigma_u_sq = 1.0;
  int n_tags = 0;
};

/// sum_{d=1..N} C(N,d) Q( sqrt(K sigma_s^2/sigma_u^2 * d * delta0) ).
double pep_union_bound(const PepBoundParams& p);

/// (1/2) sum_{d=1..N} C(N,d) exp( -K sigma_s^2 d delta0 / (2 sigma_u^2) );
/// termwise >= the union bound.
double pep_chernoff_bound(const PepBoundParams& p);

/// Gaussian tail Q(x) via the complementary error function.
double q_function(double x);

/// Monte Carlo mean of |v_i|^2 over channel draws and tags; converges to
/// zeta * M for unit-variance channels.
double estimate_delta0(const SystemConfig& cfg, RngStream& rng, int n_draws);

}  // namespace ambc
