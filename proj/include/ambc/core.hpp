#pragma once

// Core domain types shared by every other module: system configuration,
// hypothesis indexing over joint tag states, and deterministic RNG streams.

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ambc {

using cplx = std::complex<double>;

/// Invalid scenario parameters (bad dimensions, non-positive variances, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// API misuse that is a programming error, not a data problem
/// (e.g. backward() before forward()).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class SourceKind { GaussianSource, Qpsk, Qam16 };

const char* source_kind_name(SourceKind k);
SourceKind source_kind_from_name(const std::string& name);

/// How the per-tag backscatter component v_i is faded.
/// RayleighVector: v_i = alpha_i * g_i with g_i ~ CN(0, I_M); the reflection
///   phase is absorbed into the vector, giving per-antenna diversity. This is
///   the model that reproduces the reference BER curves and is the default.
/// ProductFg: v_i = alpha_i * f_i * g_i with a scalar forward coefficient
///   f_i ~ CN(0,1); all antennas share one deep-fading factor.
enum class TagChannelModel { RayleighVector, ProductFg };

/// Full scenario description. N tags, an M-antenna reader, K ambient source
/// samples per tag symbol ("source-to-tag ratio"), frames of T tag symbols
/// of which the first P are pilots.
struct SystemConfig {
  int n_tags = 2;
  int n_antennas = 4;
  int str_samples = 20;
  int frame_len = 160;
  int n_pilots = 32;
  std::vector<double> zeta_db = {-20.0, -20.0};  // one entry per tag
  double snr_db = 0.0;
  double sigma_s_sq = 1.0;
  SourceKind source = SourceKind::Qpsk;
  TagChannelModel tag_channel = TagChannelModel::RayleighVector;
  std::uint64_t seed = 0;

  int n_hypotheses() const { return 1 << n_tags; }

  /// Noise power derived from the direct-path SNR: sigma_s^2 / 10^(SNR/10).
  /// snr_db = +infinity is the noiseless sentinel and yields 0.
  double sigma_u_sq() const;

  /// Backscatter amplitude for one tag: sqrt(10^(zeta_dB/10)).
  double alpha(int tag) const;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  /// Convenience: uniform zeta across all tags.
  void set_uniform_zeta(double zeta) { zeta_db.assign(n_tags, zeta); }
};

/// One joint tag-state combination. bits[i] is the state of tag i+1 and
/// equals bit i of index (LSB = tag 1); this convention is fixed globally.
struct Hypothesis {
  int index = 0;
  std::vector<std::uint8_t> bits;

  static Hypothesis from_index(int index, int n_tags);
};

/// Encodes a state vector into its hypothesis index.
int hypothesis_index(const std::uint8_t* states, int n_tags);

Hypothesis hypothesis_from_states(const std::vector<std::uint8_t>& states);

/// Number of differing tag bits = popcount(j XOR l).
int hamming_distance(int j, int l);

/// Deterministic random stream addressable by (seed, stream_id).
/// Streams with the same (seed, stream_id) are identical; streams with
/// distinct ids are independent for simulation purposes. Single-owner:
/// not synchronized, use one stream per worker.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double next_double();

  /// Uniform integer in [0, n), n >= 1.
  std::uint64_t next_below(std::uint64_t n);

  /// Fair bit.
  int next_bit() { return static_cast<int>(next_u64() >> 63); }

  /// Standard complex circular Gaussian scaled to the given total variance:
  /// real and imaginary parts are each N(0, variance/2). One Box-Muller
  /// pair per draw, fixed operation order.
  cplx next_cgaussian(double variance);

  /// Fisher-Yates shuffle using this stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t s_[4];  // xoshiro256++ state
};

/// dim i.i.d. circularly symmetric complex Gaussian components, each with
/// total variance `variance` (variance/2 per real dimension).
std::vector<cplx> sample_circular_gaussian(RngStream& rng, int dim,
                                           double variance);

/// Small dense row-major complex matrix.
struct CMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<cplx> a;

  CMatrix() = default;
  CMatrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  cplx* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const cplx* row(int r) const {
    return a.data() + static_cast<std::size_t>(r) * cols;
  }
  cplx& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  const cplx& at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
};

namespace stream_lane {
// Fixed purpose lanes so unrelated draws never share a stream. Sweep
// methods use lanes 0..15.
inline constexpr std::uint64_t kEmbedNetInit = 16;
inline constexpr std::uint64_t kChanEstNetInit = 17;
inline constexpr std::uint64_t kEmbedNetTrain = 18;
inline constexpr std::uint64_t kChanEstNetTrain = 19;
inline constexpr std::uint64_t kDelta0 = 20;
inline constexpr std::uint64_t kEval = 21;
}  // namespace stream_lane

/// Composite stream id: (lane, point, trial) packed as 16/16/32 bits.
std::uint64_t make_stream_id(std::uint64_t lane, std::uint64_t point,
                             std::uint64_t trial);

}  // namespace ambc
