#pragma once

// Monte Carlo experiment driver: BER sweeps over SNR / zeta / K / N / P for
// any subset of detectors, PEP bound evaluation, throughput accounting, and
// CSV/plot-data emission. Trials are sharded over worker threads with
// per-trial RNG streams and exact integer error counting, so results are
// identical for any worker count.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ambc/chanestnet.hpp"
#include "ambc/core.hpp"
#include "ambc/embednet.hpp"

namespace ambc {

enum class Method {
  LrtPerfectCsi,
  EnergyDetector,
  EmbedNetMethod,
  ChanEstNetMethod,
  PepUnion,
  PepChernoff,
};

const char* method_name(Method m);
Method method_from_name(const std::string& name);

enum class SweepAxis { SnrDb, ZetaDb, KSamples, NTags, PPilots };

const char* axis_name(SweepAxis a);
SweepAxis axis_from_name(const std::string& name);

/// Applies one axis value to a base config (zeta applies uniformly to all
/// tags; changing N replicates the base zeta).
SystemConfig apply_axis(const SystemConfig& base, SweepAxis axis, double value);

struct SweepSpec {
  SystemConfig base;
  SweepAxis axis = SweepAxis::SnrDb;
  std::vector<double> values;       // nonempty, strictly increasing
  std::vector<Method> methods;
  long trials = 10000;              // frames per point
  std::string embednet_model;       // checkpoint paths for learned methods
  std::string chanestnet_model;
  double delta0 = std::numeric_limits<double>::quiet_NaN();  // NaN = estimate

  void validate() const;
};

struct BerRow {
  Method method = Method::LrtPerfectCsi;
  SweepAxis axis = SweepAxis::SnrDb;
  double axis_value = 0.0;
  int n_tags = 0;
  double ber = 0.0;   // bound value for the PEP rows (may exceed 1)
  double ci95 = 0.0;  // 1.96 sqrt(ber (1-ber) / bit_count); 0 for bounds
  long bit_count = 0;
  long error_count = 0;
  long trials = 0;
  std::uint64_t seed = 0;
  double wall_time = 0.0;      // seconds; not part of the CSV
  long error_sq_sum = 0;       // sum of squared per-frame error counts

  /// Standard error of the BER estimate with the frame as the sampling
  /// unit. Bit errors cluster within a frame (one channel draw), so this
  /// exceeds the iid-bits sigma behind ci95, especially at high SNR.
  double frame_sigma() const;
};

struct BerSweepResult {
  std::vector<BerRow> rows;
};

/// Runs every (method, axis value) cell. Learned methods load their
/// checkpoints once and are cloned per worker. Deterministic for a given
/// (spec, seed) regardless of AMBC_THREADS.
BerSweepResult run_sweep(const SweepSpec& spec);

/// Union and Chernoff PEP rows per axis value (axis must be SnrDb or
/// KSamples); delta0 estimated via estimate_delta0 when the spec leaves it
/// NaN.
BerSweepResult run_bounds(const SweepSpec& spec);

struct ThroughputEntry {
  Method method;
  double axis_value = 0.0;
  double b_pc = 1.0;      // bits per tag symbol
  double eta_data = 0.8;  // 1 - P/T
  double ber = 0.0;
  double t_tag = 0.0;     // b_pc * eta_data * (1 - ber)
};

/// Scheme presets: "ours" and "lrt" use b_pc = 1, eta = 0.8; "reference"
/// uses b_pc = 0.5, eta = 1 (line-coded signaling without pilots).
std::vector<ThroughputEntry> compute_throughput(const std::vector<BerRow>& rows,
                                                const std::string& scheme);

/// CSV schema (bit-exact header, 6 significant digits, rows ordered by
/// method then axis value):
/// method,axis,axis_value,n_tags,ber,ci95,bit_count,error_count,trials,seed
void write_csv(const std::string& path, const std::vector<BerRow>& rows);
std::vector<BerRow> read_csv(const std::string& path);

/// Same rows with a t_tag column appended.
void write_csv_with_throughput(const std::string& path,
                               const std::vector<BerRow>& rows,
                               const std::vector<ThroughputEntry>& entries);

/// Gnuplot-friendly: first column = axis value, one BER column per method.
void write_plot_data(const std::string& path, const std::vector<BerRow>& rows);

/// Worker cap from AMBC_THREADS (defaults to hardware concurrency).
int worker_count();

/// Counts bit errors of one detector over one frame's data symbols.
long count_frame_bit_errors(const Frame& frame,
                            const std::vector<std::uint8_t>& decided_bits);

}  // namespace ambc
