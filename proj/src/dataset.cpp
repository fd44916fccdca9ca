#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "oamtopo/binio.hpp"
#include "oamtopo/pipeline.hpp"
#include "oamtopo/rng.hpp"
#include "oamtopo/turbulence.hpp"

namespace oamtopo {

std::uint64_t sample_seed(std::uint64_t master, std::uint32_t label, std::uint32_t index) noexcept {
  return seed_hash({master, label, index});
}

Image Dataset::image(std::size_t index, ChannelKind kind, const GridSpec& grid) const {
  if (grid.side != side) throw std::invalid_argument("grid side does not match dataset side");
  const auto it = std::find(channels.begin(), channels.end(), kind);
  if (it == channels.end()) throw std::invalid_argument(std::string("dataset has no ") + to_string(kind) + " channel");
  const std::size_t c = static_cast<std::size_t>(it - channels.begin());
  const Sample& s = samples.at(index);
  Image img(grid);
  const float* src = s.data.data() + c * plane();
  for (Eigen::Index i = 0; i < img.values.size(); ++i) img.values.data()[i] = src[i];
  return img;
}

Dataset generate_dataset(const ExperimentConfig& config) {
  config.validate();
  const ModeBasis basis(config.modes(), config.grid);
  Dataset ds;
  ds.side = config.grid.side;
  ds.n_bits = config.n_bits;
  ds.channels = config.channels;
  const auto per = static_cast<std::size_t>(config.samples_per_class);
  const auto classes = static_cast<std::size_t>(config.classes());
  ds.samples.resize(classes * per);
  const std::size_t plane = ds.plane();

  parallel_for(ds.samples.size(), config.jobs, [&](std::size_t i) {
    const auto label = static_cast<std::uint32_t>(i / per);
    const auto index = static_cast<std::uint32_t>(i % per);
    Sample& s = ds.samples[i];
    s.label = label;
    s.seed = sample_seed(config.seed, label, index);

    TurbulenceSpec spec;
    spec.level = config.turbulence;
    spec.grid = config.grid;
    spec.aperture = config.aperture;
    spec.seed = s.seed;
    spec.propagation = config.propagation;
    const ComplexField rx = channel(basis.encode(Message{label, config.n_bits}), spec, config.noise_sigma);

    s.data.resize(plane * config.channels.size());
    for (std::size_t c = 0; c < config.channels.size(); ++c) {
      const Image img = config.channels[c] == ChannelKind::intensity ? intensity(rx) : phase(rx);
      float* dst = s.data.data() + c * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = static_cast<float>(img.values.data()[p]);
    }
  });
  return ds;
}

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  if (ds.side < 1 || ds.side > 65535) throw std::invalid_argument("dataset side out of range");
  if (ds.channels.empty() || ds.channels.size() > 255) throw std::invalid_argument("dataset channel count out of range");
  ByteWriter w;
  w.bytes("OAMD");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.samples.size()));
  w.u16(static_cast<std::uint16_t>(ds.side));
  w.u16(static_cast<std::uint16_t>(ds.side));
  w.u8(static_cast<std::uint8_t>(ds.channels.size()));
  w.u8(0);  // f32 little-endian
  w.u16(static_cast<std::uint16_t>(ds.n_bits));
  for (auto c : ds.channels) w.u8(static_cast<std::uint8_t>(c));
  const std::size_t values = ds.plane() * ds.channels.size();
  for (const auto& s : ds.samples) {
    if (s.data.size() != values) throw std::invalid_argument("sample data length does not match header");
    w.u32(s.label);
    w.u64(s.seed);
    for (float v : s.data) w.f32(v);
  }
  return std::move(w.data());
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "OAMD") throw std::runtime_error("not a dataset file (bad magic)");
  const auto version = r.u32();
  if (version != kDatasetVersion) throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  Dataset ds;
  const auto count = r.u32();
  const auto h = r.u16();
  const auto w = r.u16();
  if (h != w || h == 0) throw std::runtime_error("dataset grid must be square and non-empty");
  ds.side = h;
  const auto n_channels = r.u8();
  if (r.u8() != 0) throw std::runtime_error("unsupported dataset dtype");
  ds.n_bits = r.u16();
  if (ds.n_bits < 1 || ds.n_bits > 16) throw std::runtime_error("dataset n_bits out of range");
  for (int c = 0; c < n_channels; ++c) {
    const auto tag = r.u8();
    if (tag > 1) throw std::runtime_error("unknown channel kind tag " + std::to_string(tag));
    ds.channels.push_back(static_cast<ChannelKind>(tag));
  }
  const std::size_t values = ds.plane() * n_channels;
  if (r.remaining() != std::size_t(count) * (12 + 4 * values))
    throw std::runtime_error("dataset size does not match its header");
  ds.samples.resize(count);
  for (auto& s : ds.samples) {
    s.label = r.u32();
    s.seed = r.u64();
    if (s.label >= static_cast<std::uint32_t>(ds.classes())) throw std::runtime_error("dataset label out of range");
    s.data.resize(values);
    for (auto& v : s.data) v = r.f32();
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds, const ExperimentConfig& config) {
  atomic_write(path, encode_dataset(ds));
  nlohmann::ordered_json meta;
  meta["mode_set"] = config.modes().charges;
  meta["n_bits"] = ds.n_bits;
  meta["samples_per_class"] = config.samples_per_class;
  meta["turbulence"] = config.turbulence;
  meta["propagation"] = config.propagation;
  meta["aperture"] = config.aperture;
  meta["noise_sigma"] = config.noise_sigma;
  meta["grid_side"] = ds.side;
  meta["grid_extent"] = config.grid.extent;
  std::vector<std::string> ch;
  for (auto c : ds.channels) ch.emplace_back(to_string(c));
  meta["channels"] = ch;
  meta["seed"] = config.seed;
  meta["config_hash"] = config.hash();
  atomic_write(path.string() + ".json", meta.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

Split split_dataset(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.classes()));
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class.at(ds.samples[i].label).push_back(i);
  Split out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) continue;
    if (idx.size() < 2) throw std::invalid_argument("class " + std::to_string(c) + " has fewer than 2 samples");
    SplitMix64 rng(seed_hash({seed, c, 0x73706c6974ULL}));
    for (std::size_t i = idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.below(i + 1)]);
    // the small epsilon keeps exact products such as 0.85 * 20 from rounding up
    const auto n_train = std::min(idx.size() - 1, static_cast<std::size_t>(std::ceil(ratio * double(idx.size()) - 1e-9)));
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  return out;
}

}  // namespace oamtopo
