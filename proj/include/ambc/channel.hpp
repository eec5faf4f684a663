#pragma once

// Channel and frame synthesis: Rayleigh channel draws, ambient source
// symbols, pilot schedules, and the received observation tensor
//   x_k = w_j * s_k + u_k,   w_j = h + sum_i b_{j,i} v_i,  v_i = alpha_i f_i g_i.

#include <cstdint>
#include <string>
#include <vector>

#include "ambc/core.hpp"

namespace ambc {

struct ChannelRealization {
  int n_tags = 0;
  int m_antennas = 0;
  std::vector<cplx> h;  // direct channel, length M
  std::vector<cplx> f;  // forward channels, length N
  CMatrix g;            // backscatter channels, N x M
  CMatrix v;            // v_i = alpha_i f_i g_i, N x M
  CMatrix w;            // effective channels per hypothesis, 2^N x M
};

/// h ~ CN(0, I_M), f_i ~ CN(0,1), g_i ~ CN(0, I_M); v and all 2^N effective
/// channels populated. Draw order: h, then per tag (f_i, g_i row).
ChannelRealization draw_channel(const SystemConfig& cfg, RngStream& rng);

struct AmbientSource {
  SourceKind kind = SourceKind::GaussianSource;
  double sigma_s_sq = 1.0;
  std::vector<cplx> constellation;  // empty for GaussianSource

  static AmbientSource make(SourceKind kind, double sigma_s_sq);

  /// Var(|s|^2): sigma_s^4 for the Gaussian source, exact constellation
  /// moment otherwise (0 for constant-modulus sets like QPSK).
  double var_s2() const;
};

/// i.i.d. CN(0, sigma_s^2) for the Gaussian source, uniform constellation
/// points otherwise.
std::vector<cplx> draw_ambient(const AmbientSource& src, RngStream& rng,
                               int count);

enum class ScheduleKind { ClassBalanced, OneHot };

/// Pilot tag-state plan for one frame. ClassBalanced assigns a hypothesis
/// index to each pilot (round-robin over all 2^N classes, order shuffled per
/// frame); OneHot assigns a configuration index in [0, N] where 0 means all
/// tags off and i means only tag i reflecting.
struct PilotSchedule {
  ScheduleKind kind = ScheduleKind::ClassBalanced;
  std::vector<int> assignments;  // length P

  /// Round-robin over classes; requires P >= 2^N so every class is covered.
  static PilotSchedule class_balanced(int n_tags, int n_pilots);

  /// floor(P/(N+1)) pilots per configuration, remainder to configuration 0;
  /// requires P >= N+1.
  static PilotSchedule one_hot(int n_tags, int n_pilots);

  /// Per-configuration pilot counts (OneHot only).
  std::vector<int> one_hot_counts(int n_tags) const;
};

/// One simulated frame: T x N tag states (first P rows from the pilot
/// schedule, the rest i.i.d. uniform bits), T x K ambient symbols, and the
/// observation tensor stored symbol-major as obs[t][k][m].
struct Frame {
  int t_len = 0;
  int pilot_len = 0;
  int k_samples = 0;
  int m_antennas = 0;
  int n_tags = 0;
  std::vector<std::uint8_t> states;  // T x N row-major
  CMatrix ambient;                   // T x K
  std::vector<cplx> obs;             // T x K x M
  ChannelRealization channel;

  const std::uint8_t* state_row(int t) const {
    return states.data() + static_cast<std::size_t>(t) * n_tags;
  }
  int state_index(int t) const { return hypothesis_index(state_row(t), n_tags); }

  /// K x M observation block of one tag symbol (x_k are the rows).
  const cplx* symbol_obs(int t) const {
    return obs.data() + static_cast<std::size_t>(t) * k_samples * m_antennas;
  }
  const cplx* ambient_row(int t) const { return ambient.row(t); }
};

/// Synthesizes a frame. Draw order is fixed: pilot-schedule shuffle (class
/// balanced only), data tag bits (row-major), ambient symbols (t, k), then
/// noise (t, k, antenna). sigma_u^2 = 0 produces bit-exact noiseless
/// observations.
Frame build_frame(const SystemConfig& cfg, const ChannelRealization& ch,
                  const PilotSchedule& sched, RngStream& rng);

/// Binary frame dump (little-endian): magic "AMBCFRM1", then N, M, K, T, P
/// as uint32, then ambient (T x K) and obs (T x M x K) as row-major
/// complex64 (float32 re, im) pairs. Golden-file test format.
void write_frame_dump(const std::string& path, const Frame& frame);
Frame read_frame_dump(const std::string& path);

}  // namespace ambc
