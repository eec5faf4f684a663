// Command-line driver: BER sweeps, detector training, PEP bounds,
// throughput accounting, and canned figure-reproduction recipes.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ambc/harness.hpp"

namespace {

using namespace ambc;

constexpr long kDeskEpisodes = 20000;  // episodic training budget
constexpr long kDeskSamples = 20000;   // regression training budget
constexpr int kDeskEpochs = 24;        // base-rate epochs
constexpr int kDeskRefineEpochs = 8;   // low-rate tail (lr / 10)

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Expands `--config file` into argv tokens for every key the command line
// does not already set, so explicit flags always win over the file.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size())
      path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0)
      path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::vector<std::string> inject;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string text = trimmed(line);
    if (text.empty() || text[0] == '#') continue;
    const auto pos = text.find('=');
    if (pos == std::string::npos)
      throw ConfigError("config file " + path + " line " +
                        std::to_string(line_no) + ": expected key=value");
    const std::string key = trimmed(text.substr(0, pos));
    const std::string value = trimmed(text.substr(pos + 1));
    const std::string flag = "--" + key;
    bool present = false;
    for (const std::string& a : args)
      present = present || a == flag || a.rfind(flag + "=", 0) == 0;
    if (!present) {
      inject.push_back(flag);
      inject.push_back(value);
    }
  }
  // insert right after the subcommand token
  std::size_t sub_pos = 1;
  while (sub_pos < args.size() && args[sub_pos].rfind('-', 0) == 0) ++sub_pos;
  if (sub_pos < args.size())
    args.insert(args.begin() + sub_pos + 1, inject.begin(), inject.end());
  return args;
}

std::vector<double> split_list(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    out.push_back(std::stod(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

std::vector<Method> parse_methods(const std::string& s) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    std::size_t next = s.find(',', pos);
    if (next == std::string::npos) next = s.size();
    out.push_back(method_from_name(s.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

// Scenario flags shared by the sweep/training subcommands. Axis flags accept
// comma lists; the single flag holding more than one value names the swept
// axis.
struct ScenarioArgs {
  std::string tags = "2";
  int antennas = 4;
  std::string str = "20";
  int frame_len = 160;
  std::string pilots = "32";
  std::string zeta_db = "-20";
  std::string snr_db = "0";
  std::string source = "qpsk";
  std::string channel_model = "rayleigh";
  std::uint64_t seed = 1;

  std::string config_path;

  void add_options(CLI::App* app) {
    app->add_option("--config", config_path,
                    "flat key=value config file; explicit flags override it");
    app->add_option("--tags", tags, "number of tags N (list sweeps it)");
    app->add_option("--antennas", antennas, "reader antennas M");
    app->add_option("--str", str, "source samples per tag symbol K (list sweeps it)");
    app->add_option("--frame-len", frame_len, "tag symbols per frame T");
    app->add_option("--pilots", pilots, "pilot symbols per frame P (list sweeps it)");
    app->add_option("--zeta-db", zeta_db,
                    "backscatter-to-direct power ratio in dB, all tags (list sweeps it)");
    app->add_option("--snr-db", snr_db, "direct-path SNR in dB (list sweeps it)");
    app->add_option("--source", source, "ambient source: gaussian, qpsk, qam16");
    app->add_option("--channel-model", channel_model,
                    "backscatter fading: rayleigh (per-antenna vector) or product");
    app->add_option("--seed", seed, "master RNG seed");
  }

  SystemConfig base_config() const {
    SystemConfig cfg;
    cfg.n_tags = static_cast<int>(split_list(tags)[0]);
    cfg.n_antennas = antennas;
    cfg.str_samples = static_cast<int>(split_list(str)[0]);
    cfg.frame_len = frame_len;
    cfg.n_pilots = static_cast<int>(split_list(pilots)[0]);
    cfg.set_uniform_zeta(split_list(zeta_db)[0]);
    cfg.snr_db = split_list(snr_db)[0];
    cfg.source = source_kind_from_name(source);
    if (channel_model == "rayleigh")
      cfg.tag_channel = TagChannelModel::RayleighVector;
    else if (channel_model == "product")
      cfg.tag_channel = TagChannelModel::ProductFg;
    else
      throw ConfigError("channel-model must be 'rayleigh' or 'product'");
    cfg.seed = seed;
    return cfg;
  }

  /// Swept axis = the one list-valued flag; defaults to snr_db.
  std::pair<SweepAxis, std::vector<double>> sweep_axis() const {
    std::vector<std::pair<SweepAxis, std::vector<double>>> multi;
    const auto consider = [&](SweepAxis axis, const std::string& text) {
      const auto vals = split_list(text);
      if (vals.size() > 1) multi.emplace_back(axis, vals);
    };
    consider(SweepAxis::SnrDb, snr_db);
    consider(SweepAxis::ZetaDb, zeta_db);
    consider(SweepAxis::KSamples, str);
    consider(SweepAxis::NTags, tags);
    consider(SweepAxis::PPilots, pilots);
    if (multi.size() > 1)
      throw ConfigError("only one axis may have multiple values per sweep");
    if (multi.size() == 1) return multi.front();
    return {SweepAxis::SnrDb, split_list(snr_db)};
  }
};

int cmd_ber_sweep(const ScenarioArgs& sc, const std::string& methods,
                  long trials, const std::string& out,
                  const std::string& plot_data, const std::string& embed_model,
                  const std::string& chanest_model, double delta0) {
  SweepSpec spec;
  spec.base = sc.base_config();
  const auto [axis, values] = sc.sweep_axis();
  spec.axis = axis;
  spec.values = values;
  spec.methods = parse_methods(methods);
  spec.trials = trials;
  spec.embednet_model = embed_model;
  spec.chanestnet_model = chanest_model;
  spec.delta0 = delta0;
  const BerSweepResult result = run_sweep(spec);
  write_csv(out, result.rows);
  std::printf("wrote %zu rows to %s\n", result.rows.size(), out.c_str());
  if (!plot_data.empty()) {
    write_plot_data(plot_data, result.rows);
    std::printf("wrote plot data to %s\n", plot_data.c_str());
  }
  return 0;
}

int cmd_train_embednet(const ScenarioArgs& sc, long episodes, double lr,
                       const std::string& out) {
  SystemConfig cfg = sc.base_config();
  cfg.validate();
  EmbedNet net = make_embednet(cfg.n_antennas, cfg.seed);
  nn::Adam opt(lr);
  std::printf("training embednet: N=%d M=%d K=%d snr=%g dB source=%s episodes=%ld\n",
              cfg.n_tags, cfg.n_antennas, cfg.str_samples, cfg.snr_db,
              source_kind_name(cfg.source), episodes);
  const TrainLog log = train_episodic(cfg, episodes, net, opt);
  nn::Metadata meta;
  meta["episodes"] = std::to_string(episodes);
  meta["seed"] = std::to_string(cfg.seed);
  meta["train_snr_db"] = std::to_string(cfg.snr_db);
  meta["source"] = source_kind_name(cfg.source);
  meta["n_tags"] = std::to_string(cfg.n_tags);
  save_embednet(out, net, meta);
  std::printf("first-step loss %.4f, last-step loss %.4f; saved %s\n",
              log.losses.empty() ? 0.0 : log.losses.front(),
              log.losses.empty() ? 0.0 : log.losses.back(), out.c_str());
  return 0;
}

int cmd_train_chanestnet(const ScenarioArgs& sc, long samples, int epochs,
                         int refine_epochs, double lr, const std::string& out) {
  SystemConfig cfg = sc.base_config();
  cfg.validate();
  ChanEstNet net = make_chanestnet(cfg.n_tags, cfg.n_antennas, cfg.seed);
  nn::Adam opt(lr);
  std::printf(
      "training chanestnet: N=%d M=%d K=%d snr=%g dB source=%s samples=%ld "
      "epochs=%d+%d\n",
      cfg.n_tags, cfg.n_antennas, cfg.str_samples, cfg.snr_db,
      source_kind_name(cfg.source), samples, epochs, refine_epochs);
  ChanEstTrainLog log = train_chanestnet(cfg, samples, epochs, net, opt);
  if (refine_epochs > 0) {
    nn::Adam refine(lr / 10.0);
    const ChanEstTrainLog tail =
        train_chanestnet(cfg, samples, refine_epochs, net, refine);
    log.epoch_loss.insert(log.epoch_loss.end(), tail.epoch_loss.begin(),
                          tail.epoch_loss.end());
  }
  nn::Metadata meta;
  meta["samples"] = std::to_string(samples);
  meta["epochs"] = std::to_string(epochs) + "+" + std::to_string(refine_epochs);
  meta["seed"] = std::to_string(cfg.seed);
  meta["train_snr_db"] = std::to_string(cfg.snr_db);
  meta["source"] = source_kind_name(cfg.source);
  save_chanestnet(out, net, meta);
  std::printf("epoch losses: first %.5f last %.5f; saved %s\n",
              log.epoch_loss.front(), log.epoch_loss.back(), out.c_str());
  return 0;
}

int cmd_pep_bound(const ScenarioArgs& sc, double delta0, const std::string& out,
                  const std::string& plot_data) {
  SweepSpec spec;
  spec.base = sc.base_config();
  const auto [axis, values] = sc.sweep_axis();
  spec.axis = axis;
  spec.values = values;
  spec.methods = {Method::PepUnion, Method::PepChernoff};
  spec.delta0 = delta0;
  const BerSweepResult result = run_bounds(spec);
  write_csv(out, result.rows);
  std::printf("wrote %zu bound rows to %s\n", result.rows.size(), out.c_str());
  if (!plot_data.empty()) write_plot_data(plot_data, result.rows);
  return 0;
}

int cmd_throughput(const std::string& in, const std::string& scheme,
                   const std::string& out) {
  const std::vector<BerRow> rows = read_csv(in);
  const auto entries = compute_throughput(rows, scheme);
  write_csv_with_throughput(out, rows, entries);
  std::printf("wrote %zu rows with t_tag to %s\n", rows.size(), out.c_str());
  return 0;
}

// ---- repro recipes ---------------------------------------------------------

struct ReproContext {
  std::string out_dir;
  long trials;
  std::uint64_t seed;
  std::string embed_model_flag, chanest_model_flag;
  bool classical_only;
};

std::string ensure_embednet(const ReproContext& rc, SourceKind source, int n_tags) {
  if (!rc.embed_model_flag.empty()) return rc.embed_model_flag;
  const std::string path = rc.out_dir + "/embednet_" +
                           source_kind_name(source) + "_n" +
                           std::to_string(n_tags) + ".ckpt";
  if (std::filesystem::exists(path)) return path;
  SystemConfig cfg;
  cfg.n_tags = n_tags;
  cfg.set_uniform_zeta(-20.0);
  cfg.snr_db = 20.0;  // trained once at high SNR, evaluated everywhere
  cfg.source = source;
  cfg.seed = rc.seed;
  std::printf("[repro] training embednet model %s (%ld episodes)...\n",
              path.c_str(), kDeskEpisodes);
  EmbedNet net = make_embednet(cfg.n_antennas, cfg.seed);
  nn::Adam opt(1e-3);
  train_episodic(cfg, kDeskEpisodes, net, opt);
  save_embednet(path, net,
                {{"episodes", std::to_string(kDeskEpisodes)},
                 {"seed", std::to_string(cfg.seed)},
                 {"train_snr_db", "20"},
                 {"source", source_kind_name(source)},
                 {"n_tags", std::to_string(n_tags)}});
  return path;
}

std::string ensure_chanestnet(const ReproContext& rc, SourceKind source, int n_tags) {
  if (!rc.chanest_model_flag.empty()) return rc.chanest_model_flag;
  const std::string path = rc.out_dir + "/chanestnet_" +
                           source_kind_name(source) + "_n" +
                           std::to_string(n_tags) + ".ckpt";
  if (std::filesystem::exists(path)) return path;
  SystemConfig cfg;
  cfg.n_tags = n_tags;
  cfg.set_uniform_zeta(-20.0);
  cfg.snr_db = 20.0;
  cfg.source = source;
  cfg.seed = rc.seed;
  std::printf("[repro] training chanestnet model %s (%ld samples, %d+%d epochs)...\n",
              path.c_str(), kDeskSamples, kDeskEpochs, kDeskRefineEpochs);
  ChanEstNet net = make_chanestnet(cfg.n_tags, cfg.n_antennas, cfg.seed);
  nn::Adam opt(1e-3);
  train_chanestnet(cfg, kDeskSamples, kDeskEpochs, net, opt);
  nn::Adam refine(1e-4);
  train_chanestnet(cfg, kDeskSamples, kDeskRefineEpochs, net, refine);
  save_chanestnet(path, net,
                  {{"samples", std::to_string(kDeskSamples)},
                   {"epochs", std::to_string(kDeskEpochs) + "+" +
                                  std::to_string(kDeskRefineEpochs)},
                   {"seed", std::to_string(cfg.seed)},
                   {"train_snr_db", "20"},
                   {"source", source_kind_name(source)}});
  return path;
}

void run_recipe_sweep(const ReproContext& rc, const std::string& name,
                      SystemConfig base, SweepAxis axis,
                      std::vector<double> values, bool learned) {
  SweepSpec spec;
  spec.base = base;
  spec.axis = axis;
  spec.values = std::move(values);
  spec.methods = {Method::LrtPerfectCsi, Method::EnergyDetector};
  spec.trials = rc.trials;
  if (learned && !rc.classical_only) {
    spec.methods.push_back(Method::EmbedNetMethod);
    spec.methods.push_back(Method::ChanEstNetMethod);
    spec.embednet_model = ensure_embednet(rc, base.source, base.n_tags);
    spec.chanestnet_model = ensure_chanestnet(rc, base.source, base.n_tags);
  }
  const BerSweepResult result = run_sweep(spec);
  const std::string csv = rc.out_dir + "/" + name + ".csv";
  const std::string dat = rc.out_dir + "/" + name + ".dat";
  write_csv(csv, result.rows);
  write_plot_data(dat, result.rows);
  std::printf("[repro] wrote %s and %s\n", csv.c_str(), dat.c_str());
}

int cmd_repro(const std::string& figure, const ReproContext& rc) {
  std::filesystem::create_directories(rc.out_dir);
  SystemConfig base;
  base.set_uniform_zeta(-20.0);
  base.seed = rc.seed;

  if (figure == "fig-gaussian-ber" || figure == "fig-qpsk-ber") {
    base.source = figure == "fig-gaussian-ber" ? SourceKind::GaussianSource
                                               : SourceKind::Qpsk;
    for (int n : {2, 3}) {
      SystemConfig cfg = base;
      cfg.n_tags = n;
      cfg.set_uniform_zeta(-20.0);
      run_recipe_sweep(rc, figure + "-n" + std::to_string(n), cfg,
                       SweepAxis::SnrDb, {0, 4, 8, 12, 16, 20}, true);
    }
    return 0;
  }
  if (figure == "fig-zeta-ber") {
    base.source = SourceKind::Qpsk;
    base.snr_db = 0.0;
    run_recipe_sweep(rc, figure, base, SweepAxis::ZetaDb,
                     {-20, -16, -12, -8, -4, 0}, true);
    return 0;
  }
  if (figure == "fig-k-ber") {
    base.source = SourceKind::Qpsk;
    base.snr_db = 10.0;
    run_recipe_sweep(rc, figure, base, SweepAxis::KSamples,
                     {1, 20, 40, 60, 80, 100}, true);
    return 0;
  }
  if (figure == "fig-n-ber") {
    base.source = SourceKind::Qpsk;
    base.snr_db = 10.0;
    // learned methods need one model per N; the classical curves suffice for
    // the scalability shape
    run_recipe_sweep(rc, figure, base, SweepAxis::NTags, {1, 2, 3, 4, 5}, false);
    return 0;
  }
  if (figure == "fig-pilot-ber") {
    base.source = SourceKind::Qpsk;
    base.snr_db = 10.0;
    for (int n : {2, 3}) {
      SystemConfig cfg = base;
      cfg.n_tags = n;
      cfg.set_uniform_zeta(-20.0);
      run_recipe_sweep(rc, figure + "-n" + std::to_string(n), cfg,
                       SweepAxis::PPilots, {8, 16, 32, 64}, true);
    }
    return 0;
  }
  if (figure == "table-throughput") {
    base.source = SourceKind::Qpsk;
    base.str_samples = 60;  // the throughput operating point
    SweepSpec spec;
    spec.base = base;
    spec.axis = SweepAxis::SnrDb;
    spec.values = {-5, 0, 5, 10, 15, 20, 25};
    spec.methods = {Method::LrtPerfectCsi};
    spec.trials = rc.trials;
    const BerSweepResult result = run_sweep(spec);
    const auto entries = compute_throughput(result.rows, "ours");
    const std::string csv = rc.out_dir + "/table-throughput.csv";
    write_csv_with_throughput(csv, result.rows, entries);
    std::printf("[repro] wrote %s\n", csv.c_str());
    return 0;
  }
  std::fprintf(stderr,
               "unknown figure id '%s'\navailable: fig-gaussian-ber, "
               "fig-qpsk-ber, fig-zeta-ber, fig-k-ber, fig-n-ber, "
               "fig-pilot-ber, table-throughput\n",
               figure.c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-tag ambient backscatter detection laboratory"};
  app.require_subcommand(1);

  // ber-sweep
  auto* sweep = app.add_subcommand("ber-sweep", "Monte Carlo BER sweep");
  ScenarioArgs sweep_sc;
  sweep_sc.add_options(sweep);
  std::string methods = "lrt,ed";
  long trials = 10000;
  std::string out_csv = "ber.csv", plot_data, embed_model, chanest_model;
  double delta0 = std::numeric_limits<double>::quiet_NaN();
  sweep->add_option("--methods", methods,
                    "comma list: lrt, ed, embednet, chanestnet, pep-union, pep-chernoff");
  sweep->add_option("--trials", trials, "frames per sweep point");
  sweep->add_option("--out", out_csv, "output CSV path");
  sweep->add_option("--plot-data", plot_data, "also write gnuplot columns here");
  sweep->add_option("--embednet-model", embed_model, "embednet checkpoint");
  sweep->add_option("--chanestnet-model", chanest_model, "chanestnet checkpoint");
  sweep->add_option("--delta0", delta0, "PEP per-tag separation (default: estimate)");

  // train-embednet
  auto* tr_embed = app.add_subcommand("train-embednet", "episodic training");
  ScenarioArgs embed_sc;
  embed_sc.snr_db = "20";
  embed_sc.add_options(tr_embed);
  long episodes = kDeskEpisodes;
  double lr_embed = 1e-3;
  std::string embed_out = "embednet.ckpt";
  tr_embed->add_option("--episodes", episodes, "training episodes (frames)");
  tr_embed->add_option("--lr", lr_embed, "Adam learning rate");
  tr_embed->add_option("--out", embed_out, "checkpoint path");

  // train-chanestnet
  auto* tr_chan = app.add_subcommand("train-chanestnet", "regression training");
  ScenarioArgs chan_sc;
  chan_sc.snr_db = "20";
  chan_sc.add_options(tr_chan);
  long samples = kDeskSamples;
  int epochs = kDeskEpochs;
  double lr_chan = 1e-3;
  std::string chan_out = "chanestnet.ckpt";
  int refine_epochs = kDeskRefineEpochs;
  tr_chan->add_option("--samples", samples, "training samples (frames)");
  tr_chan->add_option("--epochs", epochs, "epochs over the sample set");
  tr_chan->add_option("--refine-epochs", refine_epochs,
                      "extra epochs at a tenth of the learning rate");
  tr_chan->add_option("--lr", lr_chan, "Adam learning rate");
  tr_chan->add_option("--out", chan_out, "checkpoint path");

  // pep-bound
  auto* pep = app.add_subcommand("pep-bound", "union and Chernoff PEP bounds");
  ScenarioArgs pep_sc;
  pep_sc.add_options(pep);
  double pep_delta0 = std::numeric_limits<double>::quiet_NaN();
  std::string pep_out = "bounds.csv", pep_plot;
  pep->add_option("--delta0", pep_delta0, "per-tag separation (default: estimate)");
  pep->add_option("--out", pep_out, "output CSV path");
  pep->add_option("--plot-data", pep_plot, "also write gnuplot columns here");

  // throughput
  auto* tp = app.add_subcommand("throughput", "append t_tag to a BER CSV");
  std::string tp_in, tp_scheme = "ours", tp_out = "throughput.csv";
  tp->add_option("--in", tp_in, "input BER CSV")->required();
  tp->add_option("--scheme", tp_scheme, "ours, lrt or reference");
  tp->add_option("--out", tp_out, "output CSV path");

  // repro
  auto* repro = app.add_subcommand("repro", "reproduce one figure at desk scale");
  std::string figure;
  ReproContext rc;
  rc.out_dir = "repro-out";
  rc.trials = 10000;
  rc.seed = 1;
  rc.classical_only = false;
  repro->add_option("figure", figure, "figure id (see README)")->required();
  repro->add_option("--out-dir", rc.out_dir, "output directory");
  repro->add_option("--trials", rc.trials, "frames per point");
  repro->add_option("--seed", rc.seed, "master seed");
  repro->add_option("--embednet-model", rc.embed_model_flag,
                    "reuse an embednet checkpoint instead of training");
  repro->add_option("--chanestnet-model", rc.chanest_model_flag,
                    "reuse a chanestnet checkpoint instead of training");
  repro->add_flag("--classical-only", rc.classical_only,
                  "skip the learned detectors (no training)");

  std::vector<std::string> arg_storage;
  std::vector<char*> argv2;
  try {
    arg_storage = expand_config_args(argc, argv);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  argv2.reserve(arg_storage.size());
  for (std::string& s : arg_storage) argv2.push_back(s.data());
  CLI11_PARSE(app, static_cast<int>(argv2.size()), argv2.data());

  try {
    if (sweep->parsed())
      return cmd_ber_sweep(sweep_sc, methods, trials, out_csv, plot_data,
                           embed_model, chanest_model, delta0);
    if (tr_embed->parsed())
      return cmd_train_embednet(embed_sc, episodes, lr_embed, embed_out);
    if (tr_chan->parsed())
      return cmd_train_chanestnet(chan_sc, samples, epochs, refine_epochs,
                                  lr_chan, chan_out);
    if (pep->parsed()) return cmd_pep_bound(pep_sc, pep_delta0, pep_out, pep_plot);
    if (tp->parsed()) return cmd_throughput(tp_in, tp_scheme, tp_out);
    if (repro->parsed()) return cmd_repro(figure, rc);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
