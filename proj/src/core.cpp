#include "ambc/core.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace ambc {

namespace {

constexpr double kPi = 3.14159265358979323846;

inline std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

// SplitMix64 step, used only to expand the (seed, stream_id) pair into
// xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Murmur3 finalizer; bijective, so distinct stream ids under one seed can
// never collapse onto the same state.
inline std::uint64_t fmix64(std::uint64_t k) {
  k ^= k >> 33;
  k *= 0xFF51AFD7ED558CCDULL;
  k ^= k >> 33;
  k *= 0xC4CEB9FE1A85EC53ULL;
  k ^= k >> 33;
  return k;
}

}  // namespace

const char* source_kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::GaussianSource:
      return "gaussian";
    case SourceKind::Qpsk:
      return "qpsk";
    case SourceKind::Qam16:
      return "qam16";
  }
  return "?";
}

SourceKind source_kind_from_name(const std::string& name) {
  if (name == "gaussian") return SourceKind::GaussianSource;
  if (name == "qpsk") return SourceKind::Qpsk;
  if (name == "qam16") return SourceKind::Qam16;
  throw ConfigError("unknown source kind: '" + name +
                    "' (expected gaussian, qpsk or qam16)");
}

double SystemConfig::sigma_u_sq() const {
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return sigma_s_sq / std::pow(10.0, snr_db / 10.0);
}

double SystemConfig::alpha(int tag) const {
  return std::sqrt(std::pow(10.0, zeta_db.at(static_cast<std::size_t>(tag)) / 10.0));
}

void SystemConfig::validate() const {
  if (n_tags < 1 || n_tags > 16)
    throw ConfigError("n_tags must be in [1, 16], got " + std::to_string(n_tags));
  if (n_antennas < 1)
    throw ConfigError("n_antennas must be positive, got " + std::to_string(n_antennas));
  if (str_samples < 1)
    throw ConfigError("str_samples must be positive, got " + std::to_string(str_samples));
  if (frame_len < 1)
    throw ConfigError("frame_len must be positive, got " + std::to_string(frame_len));
  if (n_pilots < 1)
    throw ConfigError("n_pilots must be positive, got " + std::to_string(n_pilots));
  if (n_pilots >= frame_len)
    throw ConfigError("n_pilots must be < frame_len, got P=" +
                      std::to_string(n_pilots) + " T=" + std::to_string(frame_len));
  if (static_cast<int>(zeta_db.size()) != n_tags)
    throw ConfigError("zeta_db must have exactly n_tags entries, got " +
                      std::to_string(zeta_db.size()) + " for N=" + std::to_string(n_tags));
  if (!(sigma_s_sq > 0.0))
    throw ConfigError("sigma_s_sq must be > 0");
  if (std::isnan(snr_db)) throw ConfigError("snr_db is NaN");
}

Hypothesis Hypothesis::from_index(int index, int n_tags) {
  if (n_tags < 1 || index < 0 || index >= (1 << n_tags))
    throw ConfigError("hypothesis index " + std::to_string(index) +
                      " out of range for N=" + std::to_string(n_tags));
  Hypothesis h;
  h.index = index;
  h.bits.resize(static_cast<std::size_t>(n_tags));
  for (int i = 0; i < n_tags; ++i)
    h.bits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((index >> i) & 1);
  return h;
}

int hypothesis_index(const std::uint8_t* states, int n_tags) {
  int j = 0;
  for (int i = 0; i < n_tags; ++i)
    if (states[i]) j |= 1 << i;
  return j;
}

Hypothesis hypothesis_from_states(const std::vector<std::uint8_t>& states) {
  if (states.empty() || states.size() > 16)
    throw ConfigError("tag state vector must have length in [1, 16], got " +
                      std::to_string(states.size()));
  for (std::uint8_t b : states)
    if (b > 1) throw ConfigError("tag states must be 0 or 1");
  Hypothesis h;
  h.bits = states;
  h.index = hypothesis_index(states.data(), static_cast<int>(states.size()));
  return h;
}

int hamming_distance(int j, int l) {
  return std::popcount(static_cast<unsigned>(j ^ l));
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::uint64_t x = seed ^ fmix64(stream_id + 0x632BE59BD9B4E019ULL);
  s_[0] = splitmix64(x);
  s_[1] = splitmix64(x);
  s_[2] = splitmix64(x);
  s_[3] = splitmix64(x);
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;  // xoshiro forbids all-zero
}

std::uint64_t RngStream::next_u64() {
  // xoshiro256++
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  if (n == 0) throw UsageError("next_below(0)");
  // Multiply-high map; bias is n / 2^64, negligible for the small n used here.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

cplx RngStream::next_cgaussian(double variance) {
  // Box-Muller; one uniform pair yields one complex sample with
  // var/2 in each real dimension. Fixed operation order.
  double u1 = next_double();
  double u2 = next_double();
  while (u1 <= 0.0) u1 = next_double();  // guard log(0)
  const double r = std::sqrt(-std::log(u1) * variance);
  const double phi = 2.0 * kPi * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

std::vector<cplx> sample_circular_gaussian(RngStream& rng, int dim,
                                           double variance) {
  if (!(variance > 0.0))
    throw ConfigError("sample_circular_gaussian: variance must be > 0");
  if (dim < 1) throw ConfigError("sample_circular_gaussian: dim must be >= 1");
  std::vector<cplx> out(static_cast<std::size_t>(dim));
  for (auto& z : out) z = rng.next_cgaussian(variance);
  return out;
}

std::uint64_t make_stream_id(std::uint64_t lane, std::uint64_t point,
                             std::uint64_t trial) {
  return ((lane & 0xFFFF) << 48) | ((point & 0xFFFF) << 32) |
         (trial & 0xFFFFFFFF);
}

}  // namespace ambc
