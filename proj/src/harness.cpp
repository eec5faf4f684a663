#include "ambc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "ambc/detectors.hpp"

namespace ambc {

const char* method_name(Method m) {
  switch (m) {
    case Method::LrtPerfectCsi:
      return "lrt";
    case Method::EnergyDetector:
      return "ed";
    case Method::EmbedNetMethod:
      return "embednet";
    case Method::ChanEstNetMethod:
      return "chanestnet";
    case Method::PepUnion:
      return "pep-union";
    case Method::PepChernoff:
      return "pep-chernoff";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "lrt") return Method::LrtPerfectCsi;
  if (name == "ed") return Method::EnergyDetector;
  if (name == "embednet") return Method::EmbedNetMethod;
  if (name == "chanestnet") return Method::ChanEstNetMethod;
  if (name == "pep-union") return Method::PepUnion;
  if (name == "pep-chernoff") return Method::PepChernoff;
  throw ConfigError("unknown method '" + name +
                    "' (expected lrt, ed, embednet, chanestnet, pep-union, "
                    "pep-chernoff)");
}

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::SnrDb:
      return "snr_db";
    case SweepAxis::ZetaDb:
      return "zeta_db";
    case SweepAxis::KSamples:
      return "k_samples";
    case SweepAxis::NTags:
      return "n_tags";
    case SweepAxis::PPilots:
      return "p_pilots";
  }
  return "?";
}

SweepAxis axis_from_name(const std::string& name) {
  if (name == "snr_db") return SweepAxis::SnrDb;
  if (name == "zeta_db") return SweepAxis::ZetaDb;
  if (name == "k_samples") return SweepAxis::KSamples;
  if (name == "n_tags") return SweepAxis::NTags;
  if (name == "p_pilots") return SweepAxis::PPilots;
  throw ConfigError("unknown sweep axis '" + name + "'");
}

SystemConfig apply_axis(const SystemConfig& base, SweepAxis axis, double value) {
  SystemConfig cfg = base;
  switch (axis) {
    case SweepAxis::SnrDb:
      cfg.snr_db = value;
      break;
    case SweepAxis::ZetaDb:
      cfg.set_uniform_zeta(value);
      break;
    case SweepAxis::KSamples:
      cfg.str_samples = static_cast<int>(value);
      break;
    case SweepAxis::NTags:
      cfg.n_tags = static_cast<int>(value);
      cfg.set_uniform_zeta(base.zeta_db.empty() ? -20.0 : base.zeta_db[0]);
      break;
    case SweepAxis::PPilots:
      cfg.n_pilots = static_cast<int>(value);
      break;
  }
  return cfg;
}

void SweepSpec::validate() const {
  base.validate();
  if (values.empty()) throw ConfigError("sweep: values must be nonempty");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1]))
      throw ConfigError("sweep: values must be strictly increasing");
  if (methods.empty()) throw ConfigError("sweep: no methods selected");
  if (trials < 1) throw ConfigError("sweep: trials must be >= 1");
  for (Method m : methods) {
    if (m == Method::EmbedNetMethod && embednet_model.empty())
      throw ConfigError("sweep: embednet method needs --embednet-model");
    if (m == Method::ChanEstNetMethod && chanestnet_model.empty())
      throw ConfigError("sweep: chanestnet method needs --chanestnet-model");
    if ((m == Method::EmbedNetMethod || m == Method::ChanEstNetMethod) &&
        axis == SweepAxis::NTags)
      throw ConfigError(
          "sweep: learned methods cannot sweep n_tags with a fixed-N "
          "checkpoint; train one model per N and run separate sweeps");
  }
}

double BerRow::frame_sigma() const {
  if (trials < 1 || bit_count < 1) return 0.0;
  const double bits_per_frame = static_cast<double>(bit_count) / trials;
  const double mean = static_cast<double>(error_count) / trials;
  const double var =
      static_cast<double>(error_sq_sum) / trials - mean * mean;
  if (var <= 0.0) return 0.0;
  return std::sqrt(var / trials) / bits_per_frame;
}

int worker_count() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("AMBC_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
    else if (cap != 0) throw ConfigError("AMBC_THREADS must be a positive integer");
  }
  return n;
}

long count_frame_bit_errors(const Frame& frame,
                            const std::vector<std::uint8_t>& decided_bits) {
  const int n = frame.n_tags;
  const int q_len = frame.t_len - frame.pilot_len;
  if (static_cast<long>(decided_bits.size()) != static_cast<long>(q_len) * n)
    throw ConfigError("count_frame_bit_errors: size mismatch");
  long errors = 0;
  for (int q = 0; q < q_len; ++q) {
    const std::uint8_t* truth = frame.state_row(frame.pilot_len + q);
    const std::uint8_t* dec = decided_bits.data() + static_cast<std::size_t>(q) * n;
    for (int i = 0; i < n; ++i) errors += truth[i] != dec[i];
  }
  return errors;
}

namespace {

std::uint64_t method_lane(Method m) { return static_cast<std::uint64_t>(m); }

// One worker-side trial of a classical or learned detector; returns the bit
// error count of the frame.
long run_trial(const SystemConfig& cfg, Method method, const PilotSchedule& sched,
               RngStream& rng, EmbedNet* embed_net, ChanEstNet* chanest_net) {
  const ChannelRealization ch = draw_channel(cfg, rng);
  const Frame frame = build_frame(cfg, ch, sched, rng);
  const int q0 = frame.pilot_len;
  long errors = 0;
  switch (method) {
    case Method::LrtPerfectCsi: {
      // coherent benchmark: conditions on the true ambient symbols for every
      // source kind
      const double sigma_u_sq = cfg.sigma_u_sq();
      for (int t = q0; t < frame.t_len; ++t) {
        const LrtDecision d =
            lrt_constellation(frame.symbol_obs(t), frame.ambient_row(t),
                              cfg.str_samples, ch.w, sigma_u_sq);
        errors += hamming_distance(frame.state_index(t), d.chosen.index);
      }
      break;
    }
    case Method::EnergyDetector: {
      const AmbientSource src = AmbientSource::make(cfg.source, cfg.sigma_s_sq);
      const EnergyStats stats =
          EnergyStats::build_for_source(ch.w, src, cfg.sigma_u_sq(), cfg.str_samples);
      for (int t = q0; t < frame.t_len; ++t) {
        const LrtDecision d = energy_detect(frame.symbol_obs(t), cfg.str_samples, stats);
        errors += hamming_distance(frame.state_index(t), d.chosen.index);
      }
      break;
    }
    case Method::EmbedNetMethod: {
      const auto bits = detect_frame(frame, *embed_net);
      errors = count_frame_bit_errors(frame, bits);
      break;
    }
    case Method::ChanEstNetMethod: {
      const CorrelationFeature feat = correlate_pilots(frame);
      const ChannelEstimate est = estimate_channels(feat, *chanest_net);
      const auto bits = detect_frame_lrt(frame, est, cfg);
      errors = count_frame_bit_errors(frame, bits);
      break;
    }
    default:
      throw UsageError("run_trial: not a per-trial method");
  }
  return errors;
}

BerRow bound_row(const SweepSpec& spec, Method method, std::size_t point_idx,
                 double delta0) {
  const SystemConfig cfg =
      apply_axis(spec.base, spec.axis, spec.values[point_idx]);
  cfg.validate();
  PepBoundParams p;
  p.delta0 = delta0;
  p.k_samples = cfg.str_samples;
  p.sigma_s_sq = cfg.sigma_s_sq;
  p.sigma_u_sq = cfg.sigma_u_sq();
  p.n_tags = cfg.n_tags;
  BerRow row;
  row.method = method;
  row.axis = spec.axis;
  row.axis_value = spec.values[point_idx];
  row.n_tags = cfg.n_tags;
  row.ber = method == Method::PepUnion ? pep_union_bound(p) : pep_chernoff_bound(p);
  row.seed = spec.base.seed;
  return row;
}

}  // namespace

BerSweepResult run_sweep(const SweepSpec& spec) {
  spec.validate();
  BerSweepResult result;

  // load learned models once; workers get clones
  EmbedNet embed_proto;
  ChanEstNet chanest_proto;
  bool have_embed = false, have_chanest = false;
  for (Method m : spec.methods) {
    if (m == Method::EmbedNetMethod && !have_embed) {
      embed_proto = load_embednet(spec.embednet_model);
      have_embed = true;
    }
    if (m == Method::ChanEstNetMethod && !have_chanest) {
      chanest_proto = load_chanestnet(spec.chanestnet_model);
      have_chanest = true;
    }
  }

  double delta0 = spec.delta0;
  const bool want_bounds =
      std::any_of(spec.methods.begin(), spec.methods.end(), [](Method m) {
        return m == Method::PepUnion || m == Method::PepChernoff;
      });
  if (want_bounds && std::isnan(delta0)) {
    RngStream rng(spec.base.seed, make_stream_id(stream_lane::kDelta0, 0, 0));
    delta0 = estimate_delta0(spec.base, rng, 20000);
  }

  std::vector<Method> ordered = spec.methods;
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  for (Method method : ordered) {
    for (std::size_t pi = 0; pi < spec.values.size(); ++pi) {
      if (method == Method::PepUnion || method == Method::PepChernoff) {
        result.rows.push_back(bound_row(spec, method, pi, delta0));
        continue;
      }
      const SystemConfig cfg = apply_axis(spec.base, spec.axis, spec.values[pi]);
      cfg.validate();
      if (method == Method::EmbedNetMethod) {
        if (embed_proto.m_antennas != cfg.n_antennas)
          throw ConfigError("embednet checkpoint antenna count does not match sweep");
      }
      if (method == Method::ChanEstNetMethod) {
        if (chanest_proto.n_tags != cfg.n_tags ||
            chanest_proto.m_antennas != cfg.n_antennas)
          throw ConfigError("chanestnet checkpoint (N, M) does not match sweep");
      }
      const PilotSchedule sched =
          method == Method::ChanEstNetMethod
              ? PilotSchedule::one_hot(cfg.n_tags, cfg.n_pilots)
              : PilotSchedule::class_balanced(cfg.n_tags, cfg.n_pilots);

      const auto t0 = std::chrono::steady_clock::now();
      const int workers =
          static_cast<int>(std::min<long>(worker_count(), spec.trials));
      std::atomic<long> next_trial{0};
      std::vector<long> worker_errors(static_cast<std::size_t>(workers), 0);
      std::vector<long> worker_err_sq(static_cast<std::size_t>(workers), 0);
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(workers));
      for (int wi = 0; wi < workers; ++wi) {
        pool.emplace_back([&, wi] {
          EmbedNet embed_copy;
          ChanEstNet chanest_copy;
          if (method == Method::EmbedNetMethod) embed_copy = embed_proto;
          if (method == Method::ChanEstNetMethod) chanest_copy = chanest_proto;
          long local = 0, local_sq = 0;
          while (true) {
            const long trial = next_trial.fetch_add(1);
            if (trial >= spec.trials) break;
            RngStream rng(cfg.seed,
                          make_stream_id(method_lane(method), pi,
                                         static_cast<std::uint64_t>(trial)));
            const long e =
                run_trial(cfg, method, sched, rng, &embed_copy, &chanest_copy);
            local += e;
            local_sq += e * e;
          }
          worker_errors[static_cast<std::size_t>(wi)] = local;
          worker_err_sq[static_cast<std::size_t>(wi)] = local_sq;
        });
      }
      for (auto& th : pool) th.join();
      long errors = 0, err_sq = 0;
      for (long e : worker_errors) errors += e;
      for (long e : worker_err_sq) err_sq += e;

      BerRow row;
      row.method = method;
      row.axis = spec.axis;
      row.axis_value = spec.values[pi];
      row.n_tags = cfg.n_tags;
      row.bit_count = spec.trials *
                      static_cast<long>(cfg.frame_len - cfg.n_pilots) * cfg.n_tags;
      row.error_count = errors;
      row.error_sq_sum = err_sq;
      row.ber = static_cast<double>(errors) / static_cast<double>(row.bit_count);
      row.ci95 = 1.96 * std::sqrt(row.ber * (1.0 - row.ber) /
                                  static_cast<double>(row.bit_count));
      row.trials = spec.trials;
      row.seed = cfg.seed;
      row.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count();
      result.rows.push_back(row);
    }
  }
  return result;
}

BerSweepResult run_bounds(const SweepSpec& spec) {
  if (spec.axis != SweepAxis::SnrDb && spec.axis != SweepAxis::KSamples)
    throw ConfigError("run_bounds: bounds sweep over snr_db or k_samples only");
  double delta0 = spec.delta0;
  if (std::isnan(delta0)) {
    RngStream rng(spec.base.seed, make_stream_id(stream_lane::kDelta0, 0, 0));
    delta0 = estimate_delta0(spec.base, rng, 20000);
  }
  BerSweepResult result;
  for (Method m : {Method::PepUnion, Method::PepChernoff})
    for (std::size_t pi = 0; pi < spec.values.size(); ++pi)
      result.rows.push_back(bound_row(spec, m, pi, delta0));
  return result;
}

std::vector<ThroughputEntry> compute_throughput(const std::vector<BerRow>& rows,
                                                const std::string& scheme) {
  double b_pc = 1.0, eta = 0.8;
  if (scheme == "ours" || scheme == "lrt") {
    b_pc = 1.0;
    eta = 0.8;
  } else if (scheme == "reference") {
    b_pc = 0.5;
    eta = 1.0;
  } else {
    throw ConfigError("unknown throughput scheme '" + scheme +
                      "' (expected ours, lrt or reference)");
  }
  std::vector<ThroughputEntry> out;
  out.reserve(rows.size());
  for (const BerRow& r : rows) {
    if (r.ber < 0.0 || r.ber > 1.0)
      throw ConfigError("compute_throughput: ber outside [0, 1]");
    ThroughputEntry e;
    e.method = r.method;
    e.axis_value = r.axis_value;
    e.b_pc = b_pc;
    e.eta_data = eta;
    e.ber = r.ber;
    e.t_tag = b_pc * eta * (1.0 - r.ber);
    out.push_back(e);
  }
  return out;
}

namespace {

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_rows(std::ofstream& os, const std::vector<BerRow>& rows,
                const std::vector<ThroughputEntry>* entries) {
  os << "method,axis,axis_value,n_tags,ber,ci95,bit_count,error_count,trials,seed";
  if (entries) os << ",t_tag";
  os << "\n";
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (rows[a].method != rows[b].method) return rows[a].method < rows[b].method;
    return rows[a].axis_value < rows[b].axis_value;
  });
  for (std::size_t i : order) {
    const BerRow& r = rows[i];
    os << method_name(r.method) << ',' << axis_name(r.axis) << ','
       << fmt6(r.axis_value) << ',' << r.n_tags << ',' << fmt6(r.ber) << ','
       << fmt6(r.ci95) << ',' << r.bit_count << ',' << r.error_count << ','
       << r.trials << ',' << r.seed;
    if (entries) os << ',' << fmt6((*entries)[i].t_tag);
    os << "\n";
  }
}

}  // namespace

void write_csv(const std::string& path, const std::vector<BerRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
  write_rows(os, rows, nullptr);
  if (!os) throw std::runtime_error("CSV write failed: " + path);
}

void write_csv_with_throughput(const std::string& path,
                               const std::vector<BerRow>& rows,
                               const std::vector<ThroughputEntry>& entries) {
  if (entries.size() != rows.size())
    throw ConfigError("write_csv_with_throughput: row/entry count mismatch");
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open CSV for writing: " + path);
  write_rows(os, rows, &entries);
  if (!os) throw std::runtime_error("CSV write failed: " + path);
}

std::vector<BerRow> read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open CSV: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV: " + path);
  std::vector<BerRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() < 10) throw std::runtime_error("malformed CSV row: " + line);
    BerRow r;
    r.method = method_from_name(fields[0]);
    r.axis = axis_from_name(fields[1]);
    r.axis_value = std::stod(fields[2]);
    r.n_tags = std::stoi(fields[3]);
    r.ber = std::stod(fields[4]);
    r.ci95 = std::stod(fields[5]);
    r.bit_count = std::stol(fields[6]);
    r.error_count = std::stol(fields[7]);
    r.trials = std::stol(fields[8]);
    r.seed = std::stoull(fields[9]);
    rows.push_back(r);
  }
  return rows;
}

void write_plot_data(const std::string& path, const std::vector<BerRow>& rows) {
  // collect methods in enum order and axis values ascending
  std::vector<Method> methods;
  std::vector<double> xs;
  for (const BerRow& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    if (std::find(xs.begin(), xs.end(), r.axis_value) == xs.end())
      xs.push_back(r.axis_value);
  }
  std::sort(methods.begin(), methods.end());
  std::sort(xs.begin(), xs.end());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open plot data for writing: " + path);
  os << "# " << (rows.empty() ? "axis" : axis_name(rows.front().axis));
  for (Method m : methods) os << ' ' << method_name(m);
  os << "\n";
  for (double x : xs) {
    os << fmt6(x);
    for (Method m : methods) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const BerRow& r) {
        return r.method == m && r.axis_value == x;
      });
      os << ' ' << (it == rows.end() ? "nan" : fmt6(it->ber));
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("plot data write failed: " + path);
}

}  // namespace ambc
