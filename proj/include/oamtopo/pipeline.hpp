#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "oamtopo/autonet.hpp"
#include "oamtopo/homology.hpp"
#include "oamtopo/model_io.hpp"
#include "oamtopo/optics.hpp"
#include "oamtopo/vectorize.hpp"

namespace oamtopo {

enum class ModelKind : std::uint8_t { cnn = 0, ph_cnn = 1 };
enum class ChannelKind : std::uint8_t { intensity = 0, phase = 1 };
enum class PhHead : std::uint8_t { conv = 0, mlp = 1 };

const char* to_string(ModelKind kind) noexcept;
const char* to_string(ChannelKind kind) noexcept;
ModelKind parse_model_kind(const std::string& s);

struct NetConfig {
  std::vector<int> channels;  // one conv(3x3)+relu+maxpool(2) block per entry
  int hidden = 32;
  int stem = 1;  // > 1: leading stride-`stem` conv
  int stem_channels = 4;
  PhHead head = PhHead::conv;  // ph_cnn only
};

struct BankConfig {
  int kernels = 1024;
  std::vector<int> per_dim;  // empty: even split over 0..max_dim
  double nu = 0.1;
  NormMode norm = NormMode::literal;
};

struct SweepConfig {
  std::vector<int> bits{4, 5, 6};
  std::vector<double> turbulence{0, 3, 6, 9, 12};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int jobs = 0;  // 0: hardware concurrency

  int n_bits = 4;
  std::vector<int> charges;  // empty: 1..n_bits
  GridSpec grid;

  double turbulence = 0.0;
  double propagation = 0.5;  // Rayleigh ranges after the screen
  double aperture = 0.0;
  double noise_sigma = 0.0;

  int samples_per_class = 120;
  double split_ratio = 0.85;
  std::vector<ChannelKind> channels{ChannelKind::intensity};
  std::vector<ChannelKind> cnn_input{ChannelKind::intensity};  // subset of channels read by the plain cnn

  FiltrationParams filtration;
  BankConfig bank;
  NetConfig cnn{{4, 8, 8}, 32};
  NetConfig ph{{4, 8}, 32};
  TrainConfig train;
  SweepConfig sweep;

  ModeSet modes() const;
  int classes() const { return 1 << n_bits; }
  void validate() const;
  /// One "key = value" line per field in a fixed order; the config hash is taken over it.
  std::string canonical() const;
  std::string hash() const;
};

/// INI text: top-level keys plus [optics] [channel] [dataset] [filtration] [bank] [cnn] [ph_cnn]
/// [train] [sweep] sections. Unknown keys are rejected. Lists are space or comma separated.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

struct Sample {
  std::uint32_t label = 0;
  std::uint64_t seed = 0;
  std::vector<float> data;  // channel-major, side*side per channel, row-major
};

struct Dataset {
  int side = 0;
  int n_bits = 0;
  std::vector<ChannelKind> channels;
  std::vector<Sample> samples;

  int classes() const { return 1 << n_bits; }
  std::size_t plane() const { return static_cast<std::size_t>(side) * side; }
  /// Channel values of one sample as an image on `grid` (side must match). Throws if absent.
  Image image(std::size_t index, ChannelKind kind, const GridSpec& grid) const;
};

/// Per-sample seed = seed_hash(master, label, index); independent of generation order.
std::uint64_t sample_seed(std::uint64_t master, std::uint32_t label, std::uint32_t index) noexcept;

/// encode -> channel -> requested channels, samples_per_class per message, label-major order.
Dataset generate_dataset(const ExperimentConfig& config);

inline constexpr std::uint32_t kDatasetVersion = 1;
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);
/// Writes the dataset and a "<path>.json" sidecar (mode set, T, noise, extent, config hash).
void write_dataset(const std::filesystem::path& path, const Dataset& ds, const ExperimentConfig& config);
Dataset read_dataset(const std::filesystem::path& path);

struct Split {
  std::vector<std::size_t> train, test;
};

/// Stratified: per class n_train = min(n - 1, ceil(ratio * n)); throws if a class has < 2 samples.
Split split_dataset(const Dataset& ds, double ratio, std::uint64_t seed);

/// Diagrams of every sample's received intensity. Rips clouds scale by the image peak themselves;
/// cubical filtrations see the raw unit-power intensity, so peak height stays informative.
std::vector<PersistenceDiagram> compute_diagrams(const Dataset& ds, const FiltrationParams& params, double extent,
                                                 int jobs);

/// compute_diagrams backed by an OAMP cache and "<cache>.json" sidecar keyed on dataset content and
/// filtration; reused when the key matches. Throws on a count mismatch with a matching key.
std::vector<PersistenceDiagram> precompute_diagrams(const Dataset& ds, const FiltrationParams& params, double extent,
                                                    const std::filesystem::path& cache, int jobs,
                                                    bool* reused = nullptr);
std::uint64_t dataset_digest(const Dataset& ds);

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
};

struct TrainedModel {
  ModelKind kind = ModelKind::cnn;
  SavedModel model;
  std::vector<HistoryRow> history;
};

NetworkSpec build_spec(ModelKind kind, const ExperimentConfig& config);

/// Trains on ds.samples[train]. ph_cnn needs one diagram per dataset sample.
TrainedModel train_model(ModelKind kind, const Dataset& ds, std::span<const std::size_t> train,
                         const std::vector<PersistenceDiagram>* diagrams, const ExperimentConfig& config,
                         const std::function<void(const HistoryRow&)>& on_epoch = {});

std::string history_csv(std::span<const HistoryRow> history);

struct EvalReport {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // rows: true label, cols: predicted
  std::vector<double> per_class;
  std::size_t total = 0;
  std::string model_kind;
  double turbulence = 0.0;
  int n_bits = 0;
  std::uint64_t seed = 0;

  std::string to_json() const;
  std::string confusion_csv() const;
};

/// Evaluates on ds.samples[indices]. Models with a kernel bank need diagrams.
EvalReport evaluate(const SavedModel& model, const Dataset& ds, std::span<const std::size_t> indices,
                    const std::vector<PersistenceDiagram>* diagrams);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads (static interleaved partition).
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);
int resolve_jobs(int jobs) noexcept;

struct SweepRow {
  std::string model;
  int n_bits = 0;
  double turbulence = 0.0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
};

inline constexpr const char* kSweepHeader = "model,n_bits,turbulence,seed,accuracy,p_e";
std::string format_sweep_row(const SweepRow& row);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// Full factorial over config.sweep. Finished cells leave "<out>.cells/<cell>.done" markers holding
/// their rows and a checksum, so an interrupted sweep resumes where it stopped. The CSV is rebuilt
/// from the markers in (n_bits, turbulence, seed, model) order after every cell.
/// Throws std::runtime_error on a marker whose checksum does not match.
std::vector<SweepRow> run_sweep(const ExperimentConfig& config, const std::filesystem::path& out,
                                const std::function<void(const std::string&)>& log = {});

}  // namespace oamtopo
