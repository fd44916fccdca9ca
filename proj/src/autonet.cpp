#include "oamtopo/autonet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "oamtopo/rng.hpp"

namespace oamtopo {

std::vector<Shape3> NetworkSpec::shapes() const {
  if (input.c < 1 || input.h < 1 || input.w < 1) throw std::invalid_argument("network input shape must be positive");
  if (classes < 1) throw std::invalid_argument("network needs at least one class");
  if (layers.empty() || layers.back().kind != LayerKind::softmax)
    throw std::invalid_argument("network must end with a softmax layer");
  std::vector<Shape3> out;
  Shape3 s = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& L = layers[l];
    const std::string where = "layer " + std::to_string(l) + ": ";
    switch (L.kind) {
      case LayerKind::conv: {
        if (L.kernel < 1 || L.out < 1 || L.stride < 1 || L.pad < 0) throw std::invalid_argument(where + "bad conv parameters");
        const int h = (s.h + 2 * L.pad - L.kernel) / L.stride + 1;
        const int w = (s.w + 2 * L.pad - L.kernel) / L.stride + 1;
        if (s.h + 2 * L.pad < L.kernel || s.w + 2 * L.pad < L.kernel) throw std::invalid_argument(where + "conv kernel larger than input");
        s = {L.out, h, w};
        break;
      }
      case LayerKind::maxpool: {
        if (L.kernel < 1 || L.stride < 1) throw std::invalid_argument(where + "bad maxpool parameters");
        if (s.h < L.kernel || s.w < L.kernel) throw std::invalid_argument(where + "pool window larger than input");
        s = {s.c, (s.h - L.kernel) / L.stride + 1, (s.w - L.kernel) / L.stride + 1};
        break;
      }
      case LayerKind::relu:
        break;
      case LayerKind::flatten:
        s = {static_cast<int>(s.size()), 1, 1};
        break;
      case LayerKind::fc:
        if (L.out < 1) throw std::invalid_argument(where + "fc width must be positive");
        s = {L.out, 1, 1};
        break;
      case LayerKind::softmax:
        if (l + 1 != layers.size()) throw std::invalid_argument(where + "softmax must be the last layer");
        if (s.size() != classes)
          throw std::invalid_argument(where + "softmax input has " + std::to_string(s.size()) + " values but there are " +
                                      std::to_string(classes) + " classes");
        break;
      default:
        throw std::invalid_argument(where + "unknown layer kind");
    }
    out.push_back(s);
  }
  return out;
}

NetworkSpec alexnet_spec() {
  NetworkSpec s;
  s.input = {3, 227, 227};
  s.classes = 1000;
  s.layers = {LayerSpec::conv(11, 96, 4, 0), LayerSpec::relu(),  LayerSpec::maxpool(3, 2),
              LayerSpec::conv(5, 256, 1, 2), LayerSpec::relu(),  LayerSpec::maxpool(3, 2),
              LayerSpec::conv(3, 384, 1, 1), LayerSpec::relu(),  LayerSpec::conv(3, 384, 1, 1),
              LayerSpec::relu(),             LayerSpec::conv(3, 256, 1, 1), LayerSpec::relu(),
              LayerSpec::maxpool(3, 2),      LayerSpec::flatten(), LayerSpec::fc(4096),
              LayerSpec::relu(),             LayerSpec::fc(4096), LayerSpec::relu(),
              LayerSpec::fc(1000),           LayerSpec::softmax()};
  return s;
}

namespace {

NetworkSpec conv_stack(Shape3 input, int classes, std::span<const int> channels, int hidden, int stem = 1,
                       int stem_channels = 4) {
  NetworkSpec s;
  s.input = input;
  s.classes = classes;
  if (stem > 1) {
    s.layers.push_back(LayerSpec::conv(stem, stem_channels, stem, 0));
    s.layers.push_back(LayerSpec::relu());
  }
  for (int c : channels) {
    s.layers.push_back(LayerSpec::conv(3, c, 1, 1));
    s.layers.push_back(LayerSpec::relu());
    s.layers.push_back(LayerSpec::maxpool(2, 2));
  }
  s.layers.push_back(LayerSpec::flatten());
  s.layers.push_back(LayerSpec::fc(hidden));
  s.layers.push_back(LayerSpec::relu());
  s.layers.push_back(LayerSpec::fc(classes));
  s.layers.push_back(LayerSpec::softmax());
  s.validate();
  return s;
}

}  // namespace

NetworkSpec desk_cnn_spec(Shape3 input, int classes, std::span<const int> channels, int hidden, int stem,
                          int stem_channels) {
  return conv_stack(input, classes, channels, hidden, stem, stem_channels);
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
}

namespace {

// Parameterized layers in declaration order: (layer index, fan_in, out).
struct Slot {
  std::size_t layer;
  Eigen::Index fan_in;
  Eigen::Index out;
};

std::vector<Slot> param_slots(const NetworkSpec& spec) {
  const auto shapes = spec.shapes();
  std::vector<Slot> slots;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const Shape3 in = l == 0 ? spec.input : shapes[l - 1];
    const LayerSpec& L = spec.layers[l];
    if (L.kind == LayerKind::conv) slots.push_back({l, Eigen::Index(in.c) * L.kernel * L.kernel, L.out});
    if (L.kind == LayerKind::fc) slots.push_back({l, in.size(), L.out});
  }
  return slots;
}

template <typename S>
void im2col(const S* x, const Shape3& in, const LayerSpec& L, const Shape3& out, Mat<S>& cols) {
  const int k = L.kernel;
  cols.resize(Eigen::Index(in.c) * k * k, Eigen::Index(out.h) * out.w);
  for (int c = 0; c < in.c; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        S* row = cols.data() + ((Eigen::Index(c) * k + ky) * k + kx) * cols.cols();
        for (int oy = 0; oy < out.h; ++oy) {
          const int iy = oy * L.stride + ky - L.pad;
          S* dst = row + Eigen::Index(oy) * out.w;
          if (iy < 0 || iy >= in.h) {
            std::fill(dst, dst + out.w, S(0));
            continue;
          }
          const S* src = x + (Eigen::Index(c) * in.h + iy) * in.w;
          for (int ox = 0; ox < out.w; ++ox) {
            const int ix = ox * L.stride + kx - L.pad;
            dst[ox] = (ix < 0 || ix >= in.w) ? S(0) : src[ix];
          }
        }
      }
}

template <typename S>
void col2im(const Mat<S>& dcols, const Shape3& in, const LayerSpec& L, const Shape3& out, S* dx) {
  const int k = L.kernel;
  std::fill(dx, dx + in.size(), S(0));
  for (int c = 0; c < in.c; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const S* row = dcols.data() + ((Eigen::Index(c) * k + ky) * k + kx) * dcols.cols();
        for (int oy = 0; oy < out.h; ++oy) {
          const int iy = oy * L.stride + ky - L.pad;
          if (iy < 0 || iy >= in.h) continue;
          S* dst = dx + (Eigen::Index(c) * in.h + iy) * in.w;
          const S* src = row + Eigen::Index(oy) * out.w;
          for (int ox = 0; ox < out.w; ++ox) {
            const int ix = ox * L.stride + kx - L.pad;
            if (ix >= 0 && ix < in.w) dst[ix] += src[ox];
          }
        }
      }
}

}  // namespace

template <typename S>
ParamSet<S> ParamSet<S>::zeros(const NetworkSpec& spec) {
  ParamSet p;
  for (const Slot& s : param_slots(spec)) {
    p.weights.push_back(Mat<S>::Zero(s.out, s.fan_in));
    p.biases.push_back(Vec<S>::Zero(s.out));
  }
  return p;
}

template <typename S>
void ParamSet<S>::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

template <typename S>
std::size_t ParamSet<S>::count() const noexcept {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

template <typename S>
Gradients<S> Gradients<S>::zeros_like(const NetworkSpec& spec, const ModelParams<S>& params) {
  Gradients g;
  g.net = ParamSet<S>::zeros(spec);
  if (params.bank) g.bank = BankGradient(params.bank->size());
  return g;
}

template <typename S>
void Gradients<S>::set_zero() {
  net.set_zero();
  if (bank) {
    bank->mu.setZero();
    bank->sigma.setZero();
  }
}

template <typename S>
ParamSet<S> init_params(const NetworkSpec& spec, InitScheme scheme, std::uint64_t seed) {
  ParamSet<S> p = ParamSet<S>::zeros(spec);
  if (scheme == InitScheme::zeros) return p;
  SplitMix64 rng(seed);
  for (auto& w : p.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<S>(rng.uniform(-limit, limit));
  }
  return p;
}

template <typename S>
Vec<S> forward(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input, ForwardCache<S>* cache) {
  const auto shapes = spec.shapes();
  ForwardCache<S> local;
  ForwardCache<S>& c = cache ? *cache : local;
  c.activations.resize(spec.layers.size() + 1);
  c.columns.resize(spec.layers.size());
  c.argmax.resize(spec.layers.size());

  if (params.bank) {
    c.features = project(input.points, *params.bank);
    if (c.features.size() != spec.input.size())
      throw std::invalid_argument("kernel bank size " + std::to_string(c.features.size()) +
                                  " does not match network input size " + std::to_string(spec.input.size()));
    c.activations[0] = c.features.template cast<S>();
  } else {
    if (static_cast<Eigen::Index>(input.image.size()) != spec.input.size())
      throw std::invalid_argument("input has " + std::to_string(input.image.size()) + " values, network expects " +
                                  std::to_string(spec.input.size()));
    c.activations[0] = Eigen::Map<const Vec<S>>(input.image.data(), spec.input.size());
  }

  std::size_t slot = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& L = spec.layers[l];
    const Shape3 in = l == 0 ? spec.input : shapes[l - 1];
    const Shape3 out = shapes[l];
    const Vec<S>& x = c.activations[l];
    Vec<S>& y = c.activations[l + 1];
    switch (L.kind) {
      case LayerKind::conv: {
        im2col(x.data(), in, L, out, c.columns[l]);
        Mat<S> result = params.net.weights[slot] * c.columns[l];
        result.colwise() += params.net.biases[slot];
        y = Eigen::Map<const Vec<S>>(result.data(), result.size());
        ++slot;
        break;
      }
      case LayerKind::maxpool: {
        y.resize(out.size());
        auto& arg = c.argmax[l];
        arg.resize(static_cast<std::size_t>(out.size()));
        for (int ch = 0; ch < out.c; ++ch)
          for (int oy = 0; oy < out.h; ++oy)
            for (int ox = 0; ox < out.w; ++ox) {
              Eigen::Index best = (Eigen::Index(ch) * in.h + oy * L.stride) * in.w + ox * L.stride;
              for (int ky = 0; ky < L.kernel; ++ky)
                for (int kx = 0; kx < L.kernel; ++kx) {
                  const Eigen::Index idx = (Eigen::Index(ch) * in.h + oy * L.stride + ky) * in.w + ox * L.stride + kx;
                  if (x[idx] > x[best]) best = idx;
                }
              const Eigen::Index o = (Eigen::Index(ch) * out.h + oy) * out.w + ox;
              y[o] = x[best];
              arg[static_cast<std::size_t>(o)] = best;
            }
        break;
      }
      case LayerKind::relu:
        y = x.cwiseMax(S(0));
        break;
      case LayerKind::flatten:
        y = x;
        break;
      case LayerKind::fc:
        y = params.net.weights[slot] * x + params.net.biases[slot];
        ++slot;
        break;
      case LayerKind::softmax: {
        const S m = x.maxCoeff();
        y = (x.array() - m).exp().matrix();
        y /= y.sum();
        break;
      }
    }
  }
  return c.activations.back();
}

template <typename S>
S backward(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input,
           const ForwardCache<S>& cache, int label, Gradients<S>& acc) {
  if (label < 0 || label >= spec.classes) throw std::invalid_argument("label out of range");
  const auto shapes = spec.shapes();
  const Vec<S>& probs = cache.activations.back();
  const S loss = -std::log(std::max(probs[label], std::numeric_limits<S>::min()));

  // softmax + cross-entropy: dL/dlogits = p - onehot
  Vec<S> grad = probs;
  grad[label] -= S(1);
  const bool need_input_grad = params.bank.has_value();

  std::size_t slot = 0;
  for (const auto& L : spec.layers)
    if (L.kind == LayerKind::conv || L.kind == LayerKind::fc) ++slot;

  for (std::size_t l = spec.layers.size() - 1; l-- > 0;) {
    const LayerSpec& L = spec.layers[l];
    const Shape3 in = l == 0 ? spec.input : shapes[l - 1];
    const Shape3 out = shapes[l];
    const Vec<S>& x = cache.activations[l];
    const bool first = l == 0;
    switch (L.kind) {
      case LayerKind::conv: {
        --slot;
        Eigen::Map<const Mat<S>> dout(grad.data(), out.c, Eigen::Index(out.h) * out.w);
        acc.net.weights[slot].noalias() += dout * cache.columns[l].transpose();
        acc.net.biases[slot] += dout.rowwise().sum();
        if (first && !need_input_grad) return loss;
        Mat<S> dcols = params.net.weights[slot].transpose() * dout;
        Vec<S> dx(in.size());
        col2im(dcols, in, L, out, dx.data());
        grad.swap(dx);
        break;
      }
      case LayerKind::maxpool: {
        Vec<S> dx = Vec<S>::Zero(in.size());
        const auto& arg = cache.argmax[l];
        for (Eigen::Index o = 0; o < grad.size(); ++o) dx[arg[static_cast<std::size_t>(o)]] += grad[o];
        grad.swap(dx);
        break;
      }
      case LayerKind::relu:
        grad = (x.array() > S(0)).select(grad, S(0));
        break;
      case LayerKind::flatten:
        break;
      case LayerKind::fc: {
        --slot;
        acc.net.weights[slot].noalias() += grad * x.transpose();
        acc.net.biases[slot] += grad;
        if (first && !need_input_grad) return loss;
        Vec<S> dx = params.net.weights[slot].transpose() * grad;
        grad.swap(dx);
        break;
      }
      case LayerKind::softmax:
        break;
    }
  }

  if (params.bank) {
    const Eigen::VectorXd upstream = grad.template cast<double>();
    const BankGradient g = project_backward(input.points, *params.bank, upstream);
    acc.bank->mu += g.mu;
    acc.bank->sigma += g.sigma;
  }
  return loss;
}

template <typename S>
Gradients<S> gradients(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input, int label,
                       S* loss) {
  ForwardCache<S> cache;
  forward(spec, params, input, &cache);
  Gradients<S> g = Gradients<S>::zeros_like(spec, params);
  const S l = backward(spec, params, input, cache, label, g);
  if (loss) *loss = l;
  return g;
}

template <typename S>
int predict(const Vec<S>& probabilities) {
  if (probabilities.size() == 0) throw std::invalid_argument("predict: empty probability vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < probabilities.size(); ++i)
    if (probabilities[i] > probabilities[best]) best = i;
  return static_cast<int>(best);
}

template <typename S>
OptimizerState<S> OptimizerState<S>::init(const NetworkSpec& spec, const ModelParams<S>& params) {
  OptimizerState st;
  st.m = ParamSet<S>::zeros(spec);
  st.v = ParamSet<S>::zeros(spec);
  const auto n = static_cast<Eigen::Index>(params.bank ? params.bank->size() : 0);
  st.bank_m_mu.setZero(n, 2);
  st.bank_v_mu.setZero(n, 2);
  st.bank_m_sigma.setZero(n);
  st.bank_v_sigma.setZero(n);
  return st;
}

namespace {

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

template <typename S, typename P, typename G, typename M>
void adam_update(P& param, const G& grad, M& m, M& v, double lr_t) {
  m = S(kBeta1) * m + S(1 - kBeta1) * grad;
  v = S(kBeta2) * v + S(1 - kBeta2) * grad.cwiseAbs2();
  param.array() -= S(lr_t) * m.array() / (v.array().sqrt() + S(kEps));
}

}  // namespace

template <typename S>
S train_step(const NetworkSpec& spec, ModelParams<S>& params, std::span<const LabeledInput<S>> batch,
             const TrainConfig& config, OptimizerState<S>& state, int* correct) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Gradients<S> acc = Gradients<S>::zeros_like(spec, params);
  ForwardCache<S> cache;
  double loss = 0.0;
  if (correct) *correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Vec<S> probs = forward(spec, params, batch[i].input, &cache);
    if (correct && predict(probs) == batch[i].label) ++*correct;
    const S l = backward(spec, params, batch[i].input, cache, batch[i].label, acc);
    if (!std::isfinite(static_cast<double>(l)))
      throw std::runtime_error("non-finite loss at batch sample " + std::to_string(i) + " (optimizer step " +
                               std::to_string(state.step) + ")");
    loss += static_cast<double>(l);
  }
  const S scale = S(1) / static_cast<S>(batch.size());
  for (auto& w : acc.net.weights) w *= scale;
  for (auto& b : acc.net.biases) b *= scale;
  if (acc.bank) {
    acc.bank->mu *= static_cast<double>(scale);
    acc.bank->sigma *= static_cast<double>(scale);
  }

  ++state.step;
  const double lr = config.learning_rate;
  if (config.optimizer == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.net.weights.size(); ++k) {
      params.net.weights[k] -= S(lr) * acc.net.weights[k];
      params.net.biases[k] -= S(lr) * acc.net.biases[k];
    }
    if (params.bank)
      for (std::size_t i = 0; i < params.bank->size(); ++i) {
        auto& k = params.bank->kernels[i];
        k.mu -= lr * acc.bank->mu.row(static_cast<Eigen::Index>(i)).transpose();
        k.sigma -= lr * acc.bank->sigma[static_cast<Eigen::Index>(i)];
      }
  } else {
    const double t = static_cast<double>(state.step);
    const double lr_t = lr * std::sqrt(1.0 - std::pow(kBeta2, t)) / (1.0 - std::pow(kBeta1, t));
    for (std::size_t k = 0; k < params.net.weights.size(); ++k) {
      adam_update<S>(params.net.weights[k], acc.net.weights[k], state.m.weights[k], state.v.weights[k], lr_t);
      adam_update<S>(params.net.biases[k], acc.net.biases[k], state.m.biases[k], state.v.biases[k], lr_t);
    }
    if (params.bank) {
      const auto n = static_cast<Eigen::Index>(params.bank->size());
      Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> mu(n, 2);
      Eigen::VectorXd sigma(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        mu.row(i) = params.bank->kernels[static_cast<std::size_t>(i)].mu.transpose();
        sigma[i] = params.bank->kernels[static_cast<std::size_t>(i)].sigma;
      }
      adam_update<double>(mu, acc.bank->mu, state.bank_m_mu, state.bank_v_mu, lr_t);
      adam_update<double>(sigma, acc.bank->sigma, state.bank_m_sigma, state.bank_v_sigma, lr_t);
      for (Eigen::Index i = 0; i < n; ++i) {
        params.bank->kernels[static_cast<std::size_t>(i)].mu = mu.row(i).transpose();
        params.bank->kernels[static_cast<std::size_t>(i)].sigma = sigma[i];
      }
    }
  }
  if (params.bank) params.bank->clamp_sigmas();
  return static_cast<S>(loss / static_cast<double>(batch.size()));
}

#define OAMTOPO_INSTANTIATE(S)                                                                                      \
  template struct ParamSet<S>;                                                                                      \
  template struct Gradients<S>;                                                                                     \
  template struct OptimizerState<S>;                                                                                \
  template ParamSet<S> init_params<S>(const NetworkSpec&, InitScheme, std::uint64_t);                               \
  template Vec<S> forward<S>(const NetworkSpec&, const ModelParams<S>&, const ModelInput<S>&, ForwardCache<S>*);    \
  template S backward<S>(const NetworkSpec&, const ModelParams<S>&, const ModelInput<S>&, const ForwardCache<S>&,   \
                         int, Gradients<S>&);                                                                       \
  template Gradients<S> gradients<S>(const NetworkSpec&, const ModelParams<S>&, const ModelInput<S>&, int, S*);     \
  template int predict<S>(const Vec<S>&);                                                                           \
  template S train_step<S>(const NetworkSpec&, ModelParams<S>&, std::span<const LabeledInput<S>>, const TrainConfig&, \
                           OptimizerState<S>&, int*);

OAMTOPO_INSTANTIATE(float)
OAMTOPO_INSTANTIATE(double)

#undef OAMTOPO_INSTANTIATE

}  // namespace oamtopo
