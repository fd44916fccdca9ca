#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "oamtopo/binio.hpp"
#include "oamtopo/pipeline.hpp"

namespace oamtopo {

const char* to_string(ModelKind kind) noexcept { return kind == ModelKind::cnn ? "cnn" : "ph_cnn"; }
const char* to_string(ChannelKind kind) noexcept { return kind == ChannelKind::intensity ? "intensity" : "phase"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "cnn") return ModelKind::cnn;
  if (s == "ph_cnn" || s == "ph-cnn" || s == "ph") return ModelKind::ph_cnn;
  throw std::invalid_argument("unknown model kind '" + s + "' (expected cnn or ph_cnn)");
}

ModeSet ExperimentConfig::modes() const {
  if (charges.empty()) return ModeSet::first_adjacent(n_bits);
  return ModeSet{charges};
}

void ExperimentConfig::validate() const {
  if (n_bits < 1 || n_bits > 16) throw std::invalid_argument("n_bits must be in [1, 16]");
  const ModeSet m = modes();
  m.validate();
  if (static_cast<int>(m.size()) != n_bits) throw std::invalid_argument("charges list length must equal n_bits");
  grid.validate();
  if (!(turbulence >= 0.0)) throw std::invalid_argument("turbulence must be >= 0");
  if (!(propagation >= 0.0)) throw std::invalid_argument("propagation must be >= 0");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  if (samples_per_class < 2) throw std::invalid_argument("samples_per_class must be >= 2");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw std::invalid_argument("split_ratio must lie in (0, 1)");
  if (channels.empty() || channels.size() > 2) throw std::invalid_argument("channels must list one or two kinds");
  if (channels.size() == 2 && channels[0] == channels[1]) throw std::invalid_argument("channels must be distinct");
  if (cnn_input.empty() || cnn_input.size() > 2) throw std::invalid_argument("cnn input must list one or two kinds");
  if (cnn_input.size() == 2 && cnn_input[0] == cnn_input[1]) throw std::invalid_argument("cnn input kinds must be distinct");
  for (auto c : cnn_input)
    if (std::find(channels.begin(), channels.end(), c) == channels.end())
      throw std::invalid_argument(std::string("cnn input ") + to_string(c) + " is not among the dataset channels");
  filtration.validate();
  if (bank.kernels < 1) throw std::invalid_argument("bank kernels must be >= 1");
  if (!bank.per_dim.empty()) {
    int total = 0;
    for (int c : bank.per_dim) {
      if (c < 0) throw std::invalid_argument("bank per_dim counts must be >= 0");
      total += c;
    }
    if (total != bank.kernels) throw std::invalid_argument("bank per_dim counts must sum to bank kernels");
    if (static_cast<int>(bank.per_dim.size()) > filtration.max_dim + 1)
      throw std::invalid_argument("bank per_dim lists more dimensions than the filtration produces");
  }
  if (!(bank.nu >= 0.0)) throw std::invalid_argument("bank nu must be >= 0");
  for (const NetConfig* n : {&cnn, &ph}) {
    if (n->hidden < 1) throw std::invalid_argument("hidden width must be >= 1");
    if (n->stem < 1 || n->stem_channels < 1) throw std::invalid_argument("stem and stem_channels must be >= 1");
    for (int c : n->channels)
      if (c < 1) throw std::invalid_argument("conv channel counts must be >= 1");
  }
  if (ph.head == PhHead::conv) {
    int side = 1;
    while (side * side < bank.kernels) ++side;
    if (side * side != bank.kernels)
      throw std::invalid_argument("ph_cnn conv head needs a square kernel count (got " + std::to_string(bank.kernels) +
                                  "); use head = mlp otherwise");
  }
  train.validate();
  if (sweep.bits.empty() || sweep.turbulence.empty() || sweep.seeds.empty())
    throw std::invalid_argument("sweep lists must be non-empty");
  for (int b : sweep.bits)
    if (b < 1 || b > 16) throw std::invalid_argument("sweep bits must be in [1, 16]");
  for (double t : sweep.turbulence)
    if (!(t >= 0.0)) throw std::invalid_argument("sweep turbulence levels must be >= 0");
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ' ';
    if constexpr (std::is_floating_point_v<T>)
      s += num(xs[i]);
    else
      s += std::to_string(xs[i]);
  }
  return s;
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  std::ostringstream o;
  o << "seed = " << seed << "\n";
  o << "optics.n_bits = " << n_bits << "\n";
  o << "optics.charges = " << join(modes().charges) << "\n";
  o << "optics.side = " << grid.side << "\n";
  o << "optics.extent = " << num(grid.extent) << "\n";
  o << "channel.turbulence = " << num(turbulence) << "\n";
  o << "channel.propagation = " << num(propagation) << "\n";
  o << "channel.aperture = " << num(aperture) << "\n";
  o << "channel.noise_sigma = " << num(noise_sigma) << "\n";
  o << "dataset.samples_per_class = " << samples_per_class << "\n";
  o << "dataset.split_ratio = " << num(split_ratio) << "\n";
  o << "dataset.channels =";
  for (auto c : channels) o << ' ' << to_string(c);
  o << "\n";
  o << "filtration.mode = " << (filtration.mode == FiltrationMode::rips ? "rips" : "cubical") << "\n";
  o << "filtration.max_dim = " << filtration.max_dim << "\n";
  o << "filtration.max_radius = " << num(filtration.max_radius) << "\n";
  o << "filtration.tau = " << num(filtration.tau) << "\n";
  o << "filtration.max_points = " << filtration.max_points << "\n";
  o << "filtration.alpha = " << num(filtration.alpha) << "\n";
  o << "bank.kernels = " << bank.kernels << "\n";
  o << "bank.per_dim = " << join(bank.per_dim) << "\n";
  o << "bank.nu = " << num(bank.nu) << "\n";
  o << "bank.norm = " << (bank.norm == NormMode::literal ? "literal" : "squared") << "\n";
  for (auto [name, n] : {std::pair{"cnn", &cnn}, std::pair{"ph_cnn", &ph}}) {
    o << name << ".channels = " << join(n->channels) << "\n";
    if (n == &cnn) {
      o << "cnn.input =";
      for (auto c : cnn_input) o << ' ' << to_string(c);
      o << "\n";
    }
    o << name << ".hidden = " << n->hidden << "\n";
    o << name << ".stem = " << n->stem << "\n";
    o << name << ".stem_channels = " << n->stem_channels << "\n";
  }
  o << "ph_cnn.head = " << (ph.head == PhHead::conv ? "conv" : "mlp") << "\n";
  o << "train.optimizer = " << (train.optimizer == OptimizerKind::adam ? "adam" : "sgd") << "\n";
  o << "train.learning_rate = " << num(train.learning_rate) << "\n";
  o << "train.batch_size = " << train.batch_size << "\n";
  o << "train.epochs = " << train.epochs << "\n";
  o << "train.seed = " << train.seed << "\n";
  o << "train.init = " << (train.init == InitScheme::he_uniform ? "he_uniform" : "zeros") << "\n";
  o << "train.precision = " << (train.single_precision ? "single" : "double") << "\n";
  o << "sweep.bits = " << join(sweep.bits) << "\n";
  o << "sweep.turbulence = " << join(sweep.turbulence) << "\n";
  o << "sweep.seeds = " << join(sweep.seeds) << "\n";
  return o.str();
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a(canonical())); }

namespace {

struct Value {
  std::string key;
  std::vector<std::string> items;

  const std::string& one() const {
    if (items.size() != 1) throw std::invalid_argument("config key '" + key + "' expects a single value");
    return items[0];
  }
  long long integer() const {
    const std::string& s = one();
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty()) throw std::invalid_argument("config key '" + key + "': '" + s + "' is not an integer");
    return v;
  }
  double real() const {
    const std::string& s = one();
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != s.size() || s.empty()) throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a number");
    return v;
  }
  template <typename T, typename F>
  std::vector<T> list(F convert) const {
    std::vector<T> out;
    for (const auto& s : items) {
      Value single{key, {s}};
      out.push_back(convert(single));
    }
    return out;
  }
  std::vector<int> ints() const {
    return list<int>([](const Value& v) { return static_cast<int>(v.integer()); });
  }
  std::vector<double> reals() const {
    return list<double>([](const Value& v) { return v.real(); });
  }
  bool boolean() const {
    const std::string& s = one();
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not a boolean");
  }
  template <typename E>
  E choice(std::initializer_list<std::pair<const char*, E>> options) const {
    const std::string& s = one();
    for (const auto& [name, e] : options)
      if (s == name) return e;
    std::string allowed;
    for (const auto& [name, e] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
    throw std::invalid_argument("config key '" + key + "': '" + s + "' is not one of " + allowed);
  }
};

std::vector<std::string> split_items(const std::vector<std::string>& inputs) {
  std::vector<std::string> out;
  for (const auto& in : inputs) {
    std::string cur;
    for (char ch : in) {
      if (ch == ',' || ch == ' ' || ch == '\t') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

void apply_net(NetConfig& n, const std::string& field, const Value& v) {
  if (field == "channels")
    n.channels = v.ints();
  else if (field == "hidden")
    n.hidden = static_cast<int>(v.integer());
  else if (field == "stem")
    n.stem = static_cast<int>(v.integer());
  else if (field == "stem_channels")
    n.stem_channels = static_cast<int>(v.integer());
  else
    throw std::invalid_argument("unknown config key '" + v.key + "'");
}

std::vector<ChannelKind> channel_list(const Value& v) {
  return v.list<ChannelKind>([](const Value& x) {
    return x.choice<ChannelKind>({{"intensity", ChannelKind::intensity}, {"phase", ChannelKind::phase}});
  });
}

void apply(ExperimentConfig& c, const Value& v) {
  const std::string& k = v.key;
  const auto dot = k.find('.');
  const std::string section = dot == std::string::npos ? "" : k.substr(0, dot);
  const std::string field = dot == std::string::npos ? k : k.substr(dot + 1);
  auto unknown = [&] { throw std::invalid_argument("unknown config key '" + k + "'"); };

  if (section.empty()) {
    if (field == "seed") c.seed = static_cast<std::uint64_t>(v.integer());
    else if (field == "jobs") c.jobs = static_cast<int>(v.integer());
    else unknown();
  } else if (section == "optics") {
    if (field == "n_bits") c.n_bits = static_cast<int>(v.integer());
    else if (field == "charges") c.charges = v.ints();
    else if (field == "side") c.grid.side = static_cast<int>(v.integer());
    else if (field == "extent") c.grid.extent = v.real();
    else unknown();
  } else if (section == "channel") {
    if (field == "turbulence") c.turbulence = v.real();
    else if (field == "propagation") c.propagation = v.real();
    else if (field == "aperture") c.aperture = v.real();
    else if (field == "noise_sigma") c.noise_sigma = v.real();
    else unknown();
  } else if (section == "dataset") {
    if (field == "samples_per_class") c.samples_per_class = static_cast<int>(v.integer());
    else if (field == "split_ratio") c.split_ratio = v.real();
    else if (field == "channels")
      c.channels = channel_list(v);
    else unknown();
  } else if (section == "filtration") {
    if (field == "mode") c.filtration.mode = v.choice<FiltrationMode>({{"rips", FiltrationMode::rips}, {"cubical", FiltrationMode::cubical}});
    else if (field == "max_dim") c.filtration.max_dim = static_cast<int>(v.integer());
    else if (field == "max_radius") c.filtration.max_radius = v.real();
    else if (field == "tau") c.filtration.tau = v.real();
    else if (field == "max_points") c.filtration.max_points = static_cast<int>(v.integer());
    else if (field == "alpha") c.filtration.alpha = v.real();
    else unknown();
  } else if (section == "bank") {
    if (field == "kernels") c.bank.kernels = static_cast<int>(v.integer());
    else if (field == "per_dim") c.bank.per_dim = v.ints();
    else if (field == "nu") c.bank.nu = v.real();
    else if (field == "norm") c.bank.norm = v.choice<NormMode>({{"literal", NormMode::literal}, {"squared", NormMode::squared}});
    else unknown();
  } else if (section == "cnn") {
    if (field == "input") c.cnn_input = channel_list(v);
    else apply_net(c.cnn, field, v);
  } else if (section == "ph_cnn") {
    if (field == "head") c.ph.head = v.choice<PhHead>({{"conv", PhHead::conv}, {"mlp", PhHead::mlp}});
    else apply_net(c.ph, field, v);
  } else if (section == "train") {
    if (field == "optimizer") c.train.optimizer = v.choice<OptimizerKind>({{"adam", OptimizerKind::adam}, {"sgd", OptimizerKind::sgd}});
    else if (field == "learning_rate") c.train.learning_rate = v.real();
    else if (field == "batch_size") c.train.batch_size = static_cast<int>(v.integer());
    else if (field == "epochs") c.train.epochs = static_cast<int>(v.integer());
    else if (field == "seed") c.train.seed = static_cast<std::uint64_t>(v.integer());
    else if (field == "init") c.train.init = v.choice<InitScheme>({{"he_uniform", InitScheme::he_uniform}, {"zeros", InitScheme::zeros}});
    else if (field == "precision") c.train.single_precision = v.choice<bool>({{"single", true}, {"double", false}});
    else unknown();
  } else if (section == "sweep") {
    if (field == "bits") c.sweep.bits = v.ints();
    else if (field == "turbulence") c.sweep.turbulence = v.reals();
    else if (field == "seeds")
      c.sweep.seeds = v.list<std::uint64_t>([](const Value& x) { return static_cast<std::uint64_t>(x.integer()); });
    else unknown();
  } else {
    unknown();
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const CLI::Error& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (item.parents.size() > 1) throw std::invalid_argument("nested config sections are not supported: " + item.fullname());
    apply(base, Value{item.fullname(), split_items(item.inputs)});
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

}  // namespace oamtopo
