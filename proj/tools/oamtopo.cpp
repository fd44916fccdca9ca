#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "oamtopo/autonet.hpp"
#include "oamtopo/binio.hpp"
#include "oamtopo/pipeline.hpp"
#include "oamtopo/turbulence.hpp"

namespace fs = std::filesystem;
using namespace oamtopo;

namespace {

enum class LogLevel { quiet, info, debug };
LogLevel g_log = LogLevel::info;

void info(const std::string& msg) {
  if (g_log != LogLevel::quiet) std::cerr << msg << "\n";
}
void debug(const std::string& msg) {
  if (g_log == LogLevel::debug) std::cerr << msg << "\n";
}

struct AssertFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by the pipeline subcommands; flags override the config file.
struct Common {
  std::string config_path;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "Experiment config file (INI)")->check(CLI::ExistingFile);
    app->add_option("--jobs", jobs, "Worker threads (default: available cores)")->check(CLI::NonNegativeNumber);
    app->add_option("--seed", seed, "Master seed");
  }
  ExperimentConfig load() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
    if (jobs) c.jobs = *jobs;
    if (seed) c.seed = *seed;
    return c;
  }
};

void log_config(const ExperimentConfig& c) {
  info("config_hash=" + c.hash());
  debug(c.canonical());
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void print_cost_table(const CostTable& t, bool csv) {
  if (csv) {
    std::printf("layer,kernel,params,forward_flops,backward_flops\n");
    for (const auto& r : t.rows)
      std::printf("%s,\"%s\",%llu,%.0f,%.0f\n", r.name.c_str(), r.kernel.c_str(), static_cast<unsigned long long>(r.params),
                  r.forward_flops, r.backward_flops);
    std::printf("total,,%llu,%.0f,%.0f\n", static_cast<unsigned long long>(t.total_params), t.total_forward,
                t.total_backward);
    return;
  }
  std::printf("%-8s %-20s %12s %14s %14s\n", "layer", "kernel", "params", "forward FLOPs", "backward FLOPs");
  for (const auto& r : t.rows)
    std::printf("%-8s %-20s %12s %14s %14s\n", r.name.c_str(), r.kernel.c_str(),
                human_count(static_cast<double>(r.params)).c_str(), human_count(r.forward_flops).c_str(),
                human_count(r.backward_flops).c_str());
  std::printf("%-8s %-20s %12s %14s %14s\n", "total", "", human_count(static_cast<double>(t.total_params)).c_str(),
              human_count(t.total_forward).c_str(), human_count(t.total_backward).c_str());
}

void write_pgm(const fs::path& path, const Image& img) {
  const double lo = img.values.minCoeff();
  const double hi = img.values.maxCoeff();
  const int side = img.grid.side;
  std::string out = "P5\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
  for (Eigen::Index i = 0; i < img.values.size(); ++i) {
    const double v = hi > lo ? (img.values.data()[i] - lo) / (hi - lo) : 0.0;
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
  }
  atomic_write(path, out);
}

std::vector<PersistenceDiagram> load_or_compute_diagrams(const Dataset& ds, const ExperimentConfig& c,
                                                         const std::string& cache) {
  if (cache.empty()) return compute_diagrams(ds, c.filtration, c.grid.extent, c.jobs);
  bool reused = false;
  auto d = precompute_diagrams(ds, c.filtration, c.grid.extent, cache, c.jobs, &reused);
  info(reused ? "diagram cache reused: " + cache : "diagram cache written: " + cache);
  return d;
}

// Dataset-derived fields win over config defaults so train/eval follow the data on disk.
void adopt_dataset(ExperimentConfig& c, const Dataset& ds) {
  c.n_bits = ds.n_bits;
  if (!c.charges.empty() && static_cast<int>(c.charges.size()) != ds.n_bits) c.charges.clear();
  c.grid.side = ds.side;
  c.channels = ds.channels;
  c.validate();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"oamtopo: OAM-mode decoding with persistent homology features"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "quiet | info | debug")->check(CLI::IsMember({"quiet", "info", "debug"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a labeled dataset");
  Common gen_c;
  gen_c.add(gen);
  std::optional<int> gen_bits, gen_per_class;
  std::optional<double> gen_t, gen_noise;
  std::vector<std::string> gen_channels;
  std::string gen_out;
  gen->add_option("--bits", gen_bits, "Message length n (M = 2^n classes)");
  gen->add_option("--turbulence", gen_t, "Turbulence level T = D / r0");
  gen->add_option("--noise", gen_noise, "Detector noise sigma");
  gen->add_option("--per-class", gen_per_class, "Samples per message");
  gen->add_option("--channels", gen_channels, "intensity and/or phase")->check(CLI::IsMember({"intensity", "phase"}));
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  // ph
  auto* ph = app.add_subcommand("ph", "Precompute the persistence-diagram cache of a dataset");
  Common ph_c;
  ph_c.add(ph);
  std::string ph_data, ph_out, ph_mode;
  ph->add_option("--data", ph_data, "Dataset file")->required()->check(CLI::ExistingFile);
  ph->add_option("--out", ph_out, "Diagram cache file")->required();
  ph->add_option("--mode", ph_mode, "rips | cubical")->check(CLI::IsMember({"rips", "cubical"}));

  // train
  auto* train = app.add_subcommand("train", "Train a cnn or ph_cnn model on the training split");
  Common tr_c;
  tr_c.add(train);
  std::string tr_data, tr_kind = "cnn", tr_diagrams, tr_out, tr_history;
  std::optional<int> tr_epochs;
  train->add_option("--data", tr_data, "Dataset file")->required()->check(CLI::ExistingFile);
  train->add_option("--kind", tr_kind, "cnn | ph_cnn")->check(CLI::IsMember({"cnn", "ph_cnn"}));
  train->add_option("--diagrams", tr_diagrams, "Diagram cache (computed and written if missing)");
  train->add_option("--out", tr_out, "Output model file")->required();
  train->add_option("--history", tr_history, "Per-epoch loss/accuracy CSV");
  train->add_option("--epochs", tr_epochs, "Override train.epochs");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a model on the test split");
  Common ev_c;
  ev_c.add(eval);
  std::string ev_model, ev_data, ev_diagrams, ev_out, ev_confusion;
  std::optional<double> ev_assert;
  bool ev_all = false;
  eval->add_option("--model", ev_model, "Model file")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev_data, "Dataset file")->required()->check(CLI::ExistingFile);
  eval->add_option("--diagrams", ev_diagrams, "Diagram cache for ph_cnn models");
  eval->add_option("--out", ev_out, "Report JSON");
  eval->add_option("--confusion", ev_confusion, "Confusion matrix CSV");
  eval->add_flag("--all", ev_all, "Evaluate every sample instead of the test split");
  eval->add_option("--assert", ev_assert, "Exit 3 when accuracy falls below this value");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Turbulence x bit-length accuracy grid for both models");
  Common sw_c;
  sw_c.add(sweep);
  std::string sw_out;
  sweep->add_option("--out", sw_out, "Grid CSV (cell markers go to <out>.cells/)")->required();

  // flops
  auto* flops = app.add_subcommand("flops", "Parameter and FLOP accounting table");
  std::string fl_arch = "alexnet", fl_config;
  std::optional<double> fl_batch;
  bool fl_csv = false;
  flops->add_option("--arch", fl_arch, "alexnet | cnn | ph_cnn")->check(CLI::IsMember({"alexnet", "cnn", "ph_cnn"}));
  flops->add_option("--config", fl_config, "Config for the desk architectures")->check(CLI::ExistingFile);
  flops->add_option("--batch", fl_batch, "Images per step (default 64 for alexnet, 1 otherwise)");
  flops->add_flag("--csv", fl_csv, "Raw numbers as CSV");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "Dump one sample's images (PGM) and diagram (CSV)");
  Common in_c;
  in_c.add(inspect);
  std::string in_data, in_prefix;
  std::size_t in_index = 0;
  inspect->add_option("--data", in_data, "Dataset file")->required()->check(CLI::ExistingFile);
  inspect->add_option("--index", in_index, "Sample index");
  inspect->add_option("--out", in_prefix, "Output path prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error_code=usage message=\"" << e.what() << "\"\n";
    std::cerr << "run with --help for usage\n";
    return 1;
  }
  g_log = log_level == "quiet" ? LogLevel::quiet : log_level == "debug" ? LogLevel::debug : LogLevel::info;
  const auto t0 = std::chrono::steady_clock::now();

  try {
    if (*gen) {
      ExperimentConfig c = gen_c.load();
      if (gen_bits) {
        c.n_bits = *gen_bits;
        c.charges.clear();
      }
      if (gen_t) c.turbulence = *gen_t;
      if (gen_noise) c.noise_sigma = *gen_noise;
      if (gen_per_class) c.samples_per_class = *gen_per_class;
      if (!gen_channels.empty()) {
        c.channels.clear();
        for (const auto& s : gen_channels) c.channels.push_back(s == "phase" ? ChannelKind::phase : ChannelKind::intensity);
      }
      c.validate();
      log_config(c);
      const Dataset ds = generate_dataset(c);
      write_dataset(gen_out, ds, c);
      info("wrote " + std::to_string(ds.samples.size()) + " samples to " + gen_out);
    } else if (*ph) {
      ExperimentConfig c = ph_c.load();
      if (!ph_mode.empty()) {
        c.filtration.mode = ph_mode == "rips" ? FiltrationMode::rips : FiltrationMode::cubical;
        if (c.filtration.mode == FiltrationMode::cubical && c.filtration.max_dim > 1) c.filtration.max_dim = 1;
      }
      const Dataset ds = read_dataset(ph_data);
      adopt_dataset(c, ds);
      log_config(c);
      const auto d = load_or_compute_diagrams(ds, c, ph_out);
      std::size_t points = 0;
      for (const auto& x : d) points += x.points.size();
      info("diagrams: " + std::to_string(d.size()) + ", points: " + std::to_string(points));
    } else if (*train) {
      ExperimentConfig c = tr_c.load();
      if (tr_epochs) c.train.epochs = *tr_epochs;
      const Dataset ds = read_dataset(tr_data);
      adopt_dataset(c, ds);
      log_config(c);
      const ModelKind kind = parse_model_kind(tr_kind);
      const Split sp = split_dataset(ds, c.split_ratio, c.seed);
      std::vector<PersistenceDiagram> diagrams;
      if (kind == ModelKind::ph_cnn) diagrams = load_or_compute_diagrams(ds, c, tr_diagrams);
      const TrainedModel tm = train_model(kind, ds, sp.train, kind == ModelKind::ph_cnn ? &diagrams : nullptr, c,
                                          [](const HistoryRow& h) {
                                            info("epoch " + std::to_string(h.epoch) + " loss " + fmt("%.5f", h.loss) +
                                                 " train_acc " + fmt("%.4f", h.train_accuracy));
                                          });
      save_model(tr_out, tm.model);
      if (!tr_history.empty()) atomic_write(tr_history, history_csv(tm.history));
      info("model written to " + tr_out);
    } else if (*eval) {
      ExperimentConfig c = ev_c.load();
      const Dataset ds = read_dataset(ev_data);
      adopt_dataset(c, ds);
      log_config(c);
      const SavedModel model = load_model(ev_model);
      std::vector<std::size_t> idx;
      if (ev_all) {
        for (std::size_t i = 0; i < ds.samples.size(); ++i) idx.push_back(i);
      } else {
        idx = split_dataset(ds, c.split_ratio, c.seed).test;
      }
      std::vector<PersistenceDiagram> diagrams;
      if (model.params.bank) diagrams = load_or_compute_diagrams(ds, c, ev_diagrams);
      EvalReport rep = evaluate(model, ds, idx, model.params.bank ? &diagrams : nullptr);
      rep.turbulence = c.turbulence;
      rep.seed = c.seed;
      if (!ev_out.empty()) atomic_write(ev_out, rep.to_json());
      if (!ev_confusion.empty()) atomic_write(ev_confusion, rep.confusion_csv());
      std::printf("model=%s samples=%zu accuracy=%.6f p_e=%.6f\n", rep.model_kind.c_str(), rep.total, rep.accuracy,
                  1.0 - rep.accuracy);
      if (ev_assert && rep.accuracy < *ev_assert)
        throw AssertFailure("accuracy " + fmt("%.6f", rep.accuracy) + " below " + fmt("%.6f", *ev_assert));
    } else if (*sweep) {
      const ExperimentConfig c = sw_c.load();
      log_config(c);
      const auto rows = run_sweep(c, sw_out, [](const std::string& s) { info(s); });
      info("sweep rows: " + std::to_string(rows.size()) + " -> " + sw_out);
    } else if (*flops) {
      NetworkSpec spec;
      int kernels = 0;
      const ExperimentConfig c = fl_config.empty() ? ExperimentConfig{} : load_config(fl_config);
      log_config(c);
      if (fl_arch == "alexnet") {
        spec = alexnet_spec();
      } else {
        const ModelKind kind = parse_model_kind(fl_arch);
        spec = build_spec(kind, c);
        if (kind == ModelKind::ph_cnn) kernels = c.bank.kernels;
      }
      const double batch = fl_batch.value_or(fl_arch == "alexnet" ? 64.0 : 1.0);
      if (!(batch > 0)) throw std::invalid_argument("--batch must be positive");
      if (!fl_csv) std::printf("architecture %s, FLOPs for a batch of %g images (backward = 2 x forward)\n", fl_arch.c_str(), batch);
      print_cost_table(count_params_flops(spec, batch, kernels, kernels > 0 ? 16 : 0), fl_csv);
    } else if (*inspect) {
      ExperimentConfig c = in_c.load();
      const Dataset ds = read_dataset(in_data);
      adopt_dataset(c, ds);
      log_config(c);
      if (in_index >= ds.samples.size()) throw std::invalid_argument("sample index out of range");
      const GridSpec grid{ds.side, c.grid.extent};
      for (auto kind : ds.channels) {
        const std::string path = in_prefix + "_" + to_string(kind) + ".pgm";
        write_pgm(path, ds.image(in_index, kind, grid));
        info("wrote " + path);
      }
      Dataset one;
      one.side = ds.side;
      one.n_bits = ds.n_bits;
      one.channels = ds.channels;
      one.samples = {ds.samples[in_index]};
      const auto d = compute_diagrams(one, c.filtration, c.grid.extent, 1).front();
      std::string csv = "dim,birth,death\n";
      for (const auto& p : d.sorted_points())
        csv += std::to_string(p.dim) + "," + fmt("%.9g", p.birth) + "," + fmt("%.9g", p.death) + "\n";
      atomic_write(in_prefix + "_diagram.csv", csv);
      info("wrote " + in_prefix + "_diagram.csv (label " + std::to_string(ds.samples[in_index].label) + ", " +
           std::to_string(d.points.size()) + " points)");
    }
  } catch (const AssertFailure& e) {
    std::cerr << "error_code=assert message=\"" << e.what() << "\"\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error_code=usage message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error_code=runtime message=\"" << e.what() << "\"\n";
    return 2;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  debug("elapsed_s=" + fmt("%.3f", secs));
  return 0;
}
