#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "oamtopo/binio.hpp"
#include "oamtopo/diagram_io.hpp"
#include "oamtopo/pipeline.hpp"
#include "oamtopo/rng.hpp"

namespace oamtopo {

int resolve_jobs(int jobs) noexcept {
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::min<std::size_t>(resolve_jobs(jobs), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += workers) {
          {
            std::lock_guard lock(mu);
            if (error) return;
          }
          fn(i);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

namespace {


std::string filtration_key(const FiltrationParams& p, double extent) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "intensity=raw mode=%d max_dim=%d max_radius=%.17g tau=%.17g max_points=%d alpha=%.17g extent=%.17g",
                static_cast<int>(p.mode), p.max_dim, p.max_radius, p.tau, p.max_points, p.alpha, extent);
  return buf;
}

}  // namespace

std::vector<PersistenceDiagram> compute_diagrams(const Dataset& ds, const FiltrationParams& params, double extent,
                                                 int jobs) {
  params.validate();
  std::vector<PersistenceDiagram> out(ds.samples.size());
  parallel_for(out.size(), jobs, [&](std::size_t i) { out[i] = compute_diagram(ds.image(i, ChannelKind::intensity, GridSpec{ds.side, extent}), params); });
  return out;
}

std::uint64_t dataset_digest(const Dataset& ds) { return fnv1a(encode_dataset(ds)); }

std::vector<PersistenceDiagram> precompute_diagrams(const Dataset& ds, const FiltrationParams& params, double extent,
                                                    const std::filesystem::path& cache, int jobs, bool* reused) {
  const std::string key = hex64(fnv1a(filtration_key(params, extent), dataset_digest(ds)));
  const std::filesystem::path sidecar = cache.string() + ".json";
  if (reused) *reused = false;
  if (std::filesystem::exists(cache) && std::filesystem::exists(sidecar)) {
    const auto meta = nlohmann::json::parse(read_text(sidecar));
    if (meta.value("key", std::string()) == key) {
      const auto maxf = meta.at("max_filtration").get<std::vector<double>>();
      auto diagrams = decode_diagrams(read_file(cache), params.mode, 0.0);
      if (diagrams.size() != ds.samples.size() || maxf.size() != diagrams.size())
        throw std::runtime_error("diagram cache holds " + std::to_string(diagrams.size()) + " diagrams but the dataset has " +
                                 std::to_string(ds.samples.size()) + " samples");
      for (std::size_t i = 0; i < diagrams.size(); ++i) diagrams[i].max_filtration = maxf[i];
      if (reused) *reused = true;
      return diagrams;
    }
  }
  const auto computed = compute_diagrams(ds, params, extent, jobs);
  const auto bytes = encode_diagrams(computed);
  atomic_write(cache, bytes);
  // hand back the f32-rounded values so a fresh run and a cache hit train on identical inputs
  auto diagrams = decode_diagrams(bytes, params.mode, 0.0);
  for (std::size_t i = 0; i < diagrams.size(); ++i) diagrams[i].max_filtration = computed[i].max_filtration;
  nlohmann::ordered_json meta;
  meta["key"] = key;
  meta["count"] = diagrams.size();
  meta["filtration"] = filtration_key(params, extent);
  std::vector<double> maxf;
  for (const auto& d : diagrams) maxf.push_back(d.max_filtration);
  meta["max_filtration"] = maxf;
  atomic_write(sidecar, meta.dump() + "\n");
  return diagrams;
}

NetworkSpec build_spec(ModelKind kind, const ExperimentConfig& config) {
  const int classes = config.classes();
  if (kind == ModelKind::cnn)
    return desk_cnn_spec({static_cast<int>(config.cnn_input.size()), config.grid.side, config.grid.side}, classes, config.cnn.channels,
                         config.cnn.hidden, config.cnn.stem, config.cnn.stem_channels);
  const int n = config.bank.kernels;
  if (config.ph.head == PhHead::mlp) return desk_cnn_spec({n, 1, 1}, classes, {}, config.ph.hidden);
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (side * side != n) throw std::invalid_argument("conv head needs a square kernel count");
  return desk_cnn_spec({1, side, side}, classes, config.ph.channels, config.ph.hidden, config.ph.stem,
                       config.ph.stem_channels);
}

namespace {

// Network input for plain models: intensity scaled to unit peak, phase divided by pi.
template <typename S>
std::vector<S> model_image(const Dataset& ds, std::size_t i, std::span<const std::uint8_t> inputs) {
  std::vector<std::size_t> pick;
  for (auto tag : inputs) {
    const auto it = std::find(ds.channels.begin(), ds.channels.end(), static_cast<ChannelKind>(tag));
    if (it == ds.channels.end())
      throw std::invalid_argument(std::string("model reads a ") + to_string(static_cast<ChannelKind>(tag)) +
                                  " channel the dataset lacks");
    pick.push_back(static_cast<std::size_t>(it - ds.channels.begin()));
  }
  const std::size_t plane = ds.plane();
  const Sample& s = ds.samples[i];
  std::vector<S> out(plane * pick.size());
  for (std::size_t k = 0; k < pick.size(); ++k) {
    const float* src = s.data.data() + pick[k] * plane;
    double scale = 1.0 / std::numbers::pi;
    if (ds.channels[pick[k]] == ChannelKind::intensity) {
      const float peak = *std::max_element(src, src + plane);
      scale = peak > 0.0f ? 1.0 / peak : 1.0;
    }
    for (std::size_t p = 0; p < plane; ++p) out[k * plane + p] = static_cast<S>(src[p] * scale);
  }
  return out;
}

template <typename S>
struct PreparedInputs {
  std::vector<std::vector<S>> images;
  std::vector<std::vector<SurvivingPoint>> points;

  ModelInput<S> at(std::size_t k) const {
    ModelInput<S> in;
    if (!images.empty()) in.image = images[k];
    if (!points.empty()) in.points = points[k];
    return in;
  }
};

template <typename S>
PreparedInputs<S> prepare(std::span<const std::uint8_t> image_inputs, const std::optional<KernelBank>& bank, const Dataset& ds,
                          std::span<const std::size_t> indices, const std::vector<PersistenceDiagram>* diagrams) {
  PreparedInputs<S> p;
  if (bank) {
    if (!diagrams || diagrams->size() != ds.samples.size())
      throw std::invalid_argument("a model with a kernel bank needs one diagram per dataset sample");
    for (std::size_t i : indices) p.points.push_back(surviving_points((*diagrams)[i], bank->nu));
  } else {
    for (std::size_t i : indices) p.images.push_back(model_image<S>(ds, i, image_inputs));
  }
  return p;
}

template <typename S>
TrainedModel train_typed(ModelKind kind, const Dataset& ds, std::span<const std::size_t> train,
                         const std::vector<PersistenceDiagram>* diagrams, const ExperimentConfig& config,
                         const std::function<void(const HistoryRow&)>& on_epoch) {
  if (train.empty()) throw std::invalid_argument("empty training set");
  if (ds.n_bits != config.n_bits) throw std::invalid_argument("dataset n_bits does not match the config");
  if (ds.side != config.grid.side) throw std::invalid_argument("dataset side does not match the config grid");
  const TrainConfig& tc = config.train;
  tc.validate();

  TrainedModel result;
  result.kind = kind;
  const NetworkSpec spec = build_spec(kind, config);
  std::vector<std::uint8_t> image_inputs;
  if (kind == ModelKind::cnn)
    for (auto c : config.cnn_input) image_inputs.push_back(static_cast<std::uint8_t>(c));
  ModelParams<S> params;
  params.net = init_params<S>(spec, tc.init, seed_hash({tc.seed, 0x696e6974ULL}));
  if (kind == ModelKind::ph_cnn) {
    if (!diagrams || diagrams->size() != ds.samples.size())
      throw std::invalid_argument("ph_cnn training needs one diagram per dataset sample");
    std::vector<PersistenceDiagram> seen;
    for (std::size_t i : train) seen.push_back((*diagrams)[i]);
    const std::vector<int> per_dim =
        config.bank.per_dim.empty() ? even_split(config.bank.kernels, config.filtration.max_dim + 1) : config.bank.per_dim;
    params.bank = init_bank(config.bank.kernels, per_dim, seen, config.bank.nu, config.bank.norm);
  }
  const PreparedInputs<S> inputs = prepare<S>(image_inputs, params.bank, ds, train, diagrams);
  OptimizerState<S> state = OptimizerState<S>::init(spec, params);

  std::vector<std::size_t> order(train.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  SplitMix64 rng(seed_hash({tc.seed, 0x73687566ULL}));
  std::vector<LabeledInput<S>> batch;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    for (std::size_t k = order.size() - 1; k > 0; --k) std::swap(order[k], order[rng.below(k + 1)]);
    double loss_sum = 0.0;
    long correct_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k)
        batch.push_back({inputs.at(order[k]), static_cast<int>(ds.samples[train[order[k]]].label)});
      int correct = 0;
      S loss;
      try {
        loss = train_step<S>(spec, params, batch, tc, state, &correct);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(start / tc.batch_size) +
                                 ": " + e.what());
      }
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - start);
      correct_sum += correct;
    }
    HistoryRow row{epoch, loss_sum / double(order.size()), double(correct_sum) / double(order.size())};
    result.history.push_back(row);
    if (on_epoch) on_epoch(row);
  }

  result.model.spec = spec;
  result.model.params.net = params.net.template cast<double>();
  result.model.params.bank = params.bank;
  result.model.inputs = image_inputs;
  return result;
}

}  // namespace

TrainedModel train_model(ModelKind kind, const Dataset& ds, std::span<const std::size_t> train,
                         const std::vector<PersistenceDiagram>* diagrams, const ExperimentConfig& config,
                         const std::function<void(const HistoryRow&)>& on_epoch) {
  if (config.train.single_precision) return train_typed<float>(kind, ds, train, diagrams, config, on_epoch);
  return train_typed<double>(kind, ds, train, diagrams, config, on_epoch);
}

std::string history_csv(std::span<const HistoryRow> history) {
  std::string out = "epoch,loss,train_accuracy\n";
  char buf[96];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f\n", h.epoch, h.loss, h.train_accuracy);
    out += buf;
  }
  return out;
}

EvalReport evaluate(const SavedModel& model, const Dataset& ds, std::span<const std::size_t> indices,
                    const std::vector<PersistenceDiagram>* diagrams) {
  const NetworkSpec& spec = model.spec;
  if (spec.classes != ds.classes())
    throw std::invalid_argument("model has " + std::to_string(spec.classes) + " classes, dataset has " +
                                std::to_string(ds.classes()));
  if (!model.params.bank && (spec.input.h != ds.side || spec.input.w != ds.side))
    throw std::invalid_argument("model input size does not match the dataset grid");
  const PreparedInputs<double> inputs = prepare<double>(model.inputs, model.params.bank, ds, indices, diagrams);

  EvalReport r;
  r.confusion = Eigen::MatrixXi::Zero(spec.classes, spec.classes);
  r.total = indices.size();
  r.model_kind = model.params.bank ? "ph_cnn" : "cnn";
  r.n_bits = ds.n_bits;
  ForwardCache<double> cache;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const auto probs = forward<double>(spec, model.params, inputs.at(k), &cache);
    ++r.confusion(ds.samples[indices[k]].label, predict(probs));
  }
  r.accuracy = r.total ? double(r.confusion.trace()) / double(r.total) : 0.0;
  for (int c = 0; c < spec.classes; ++c) {
    const int row = r.confusion.row(c).sum();
    r.per_class.push_back(row ? double(r.confusion(c, c)) / row : 0.0);
  }
  return r;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model_kind;
  j["n_bits"] = n_bits;
  j["turbulence"] = turbulence;
  j["seed"] = seed;
  j["total"] = total;
  j["accuracy"] = accuracy;
  j["p_e"] = 1.0 - accuracy;
  j["per_class"] = per_class;
  std::vector<std::vector<int>> rows;
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    std::vector<int> row;
    for (Eigen::Index c = 0; c < confusion.cols(); ++c) row.push_back(confusion(i, c));
    rows.push_back(std::move(row));
  }
  j["confusion"] = rows;
  return j.dump(2) + "\n";
}

std::string EvalReport::confusion_csv() const {
  std::ostringstream o;
  o << "true\\pred";
  for (Eigen::Index c = 0; c < confusion.cols(); ++c) o << ',' << c;
  o << '\n';
  for (Eigen::Index i = 0; i < confusion.rows(); ++i) {
    o << i;
    for (Eigen::Index c = 0; c < confusion.cols(); ++c) o << ',' << confusion(i, c);
    o << '\n';
  }
  return o.str();
}

}  // namespace oamtopo
