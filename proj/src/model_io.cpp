#include "oamtopo/model_io.hpp"

#include <stdexcept>
#include <string>

#include "oamtopo/binio.hpp"

namespace oamtopo {

std::vector<std::uint8_t> encode_model(const SavedModel& model) {
  const NetworkSpec& spec = model.spec;
  const ModelParams<double>& params = model.params;
  spec.validate();
  if (!params.bank && model.inputs.size() != static_cast<std::size_t>(spec.input.c))
    throw std::invalid_argument("a plain network needs one input tag per input channel");
  if (params.bank && !model.inputs.empty()) throw std::invalid_argument("a kernel-bank network takes no image inputs");
  const ParamSet<double> expected = ParamSet<double>::zeros(spec);
  if (expected.weights.size() != params.net.weights.size()) throw std::invalid_argument("parameter count does not match spec");
  for (std::size_t k = 0; k < expected.weights.size(); ++k)
    if (expected.weights[k].rows() != params.net.weights[k].rows() ||
        expected.weights[k].cols() != params.net.weights[k].cols() ||
        expected.biases[k].size() != params.net.biases[k].size())
      throw std::invalid_argument("parameter shape mismatch in layer slot " + std::to_string(k));

  ByteWriter w;
  w.bytes("OAMM");
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(spec.input.c));
  w.u32(static_cast<std::uint32_t>(spec.input.h));
  w.u32(static_cast<std::uint32_t>(spec.input.w));
  w.u32(static_cast<std::uint32_t>(spec.classes));
  w.u8(static_cast<std::uint8_t>(model.inputs.size()));
  for (auto t : model.inputs) w.u8(t);
  w.u32(static_cast<std::uint32_t>(spec.layers.size()));
  for (const auto& L : spec.layers) {
    w.u8(static_cast<std::uint8_t>(L.kind));
    w.u32(static_cast<std::uint32_t>(L.kernel));
    w.u32(static_cast<std::uint32_t>(L.out));
    w.u32(static_cast<std::uint32_t>(L.stride));
    w.u32(static_cast<std::uint32_t>(L.pad));
  }
  w.u8(params.bank ? 1 : 0);
  if (params.bank) {
    const KernelBank& b = *params.bank;
    w.u32(static_cast<std::uint32_t>(b.size()));
    w.f64(b.nu);
    w.u8(static_cast<std::uint8_t>(b.norm_mode));
    for (const auto& k : b.kernels) {
      w.f64(k.mu[0]);
      w.f64(k.mu[1]);
      w.f64(k.sigma);
      w.u8(static_cast<std::uint8_t>(k.dim));
    }
  }
  for (std::size_t k = 0; k < params.net.weights.size(); ++k) {
    const auto& m = params.net.weights[k];
    for (Eigen::Index i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
    const auto& b = params.net.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) w.f64(b[i]);
  }
  return std::move(w.data());
}

SavedModel decode_model(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != "OAMM") throw std::runtime_error("not a model file (bad magic)");
  const auto version = r.u32();
  if (version != kModelVersion) throw std::runtime_error("unsupported model version " + std::to_string(version));
  SavedModel m;
  m.spec.input.c = static_cast<int>(r.u32());
  m.spec.input.h = static_cast<int>(r.u32());
  m.spec.input.w = static_cast<int>(r.u32());
  m.spec.classes = static_cast<int>(r.u32());
  const auto n_inputs = r.u8();
  for (int i = 0; i < n_inputs; ++i) m.inputs.push_back(r.u8());
  const auto n_layers = r.u32();
  if (n_layers > 4096) throw std::runtime_error("implausible layer count in model file");
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec L;
    const auto tag = r.u8();
    if (tag > static_cast<std::uint8_t>(LayerKind::softmax)) throw std::runtime_error("unknown layer tag in model file");
    L.kind = static_cast<LayerKind>(tag);
    L.kernel = static_cast<int>(r.u32());
    L.out = static_cast<int>(r.u32());
    L.stride = static_cast<int>(r.u32());
    L.pad = static_cast<int>(r.u32());
    m.spec.layers.push_back(L);
  }
  try {
    m.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("model file holds an invalid network: ") + e.what());
  }
  if (r.u8()) {
    KernelBank b;
    const auto n = r.u32();
    b.nu = r.f64();
    const auto mode = r.u8();
    if (mode > 1) throw std::runtime_error("unknown norm mode in model file");
    b.norm_mode = static_cast<NormMode>(mode);
    for (std::uint32_t i = 0; i < n; ++i) {
      Kernel k;
      k.mu[0] = r.f64();
      k.mu[1] = r.f64();
      k.sigma = r.f64();
      k.dim = r.u8();
      b.kernels.push_back(k);
    }
    m.params.bank = std::move(b);
  }
  m.params.net = ParamSet<double>::zeros(m.spec);
  for (std::size_t k = 0; k < m.params.net.weights.size(); ++k) {
    auto& w = m.params.net.weights[k];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = r.f64();
    auto& b = m.params.net.biases[k];
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = r.f64();
  }
  if (!r.at_end()) throw std::runtime_error("trailing bytes after model parameters");
  if (!m.params.bank && m.inputs.size() != static_cast<std::size_t>(m.spec.input.c))
    throw std::runtime_error("model file input tags do not match its input channels");
  return m;
}

void save_model(const std::filesystem::path& path, const SavedModel& model) { atomic_write(path, encode_model(model)); }

SavedModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace oamtopo
