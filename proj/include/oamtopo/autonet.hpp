#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "oamtopo/vectorize.hpp"

namespace oamtopo {

enum class LayerKind : std::uint8_t { conv = 0, maxpool = 1, relu = 2, flatten = 3, fc = 4, softmax = 5 };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 0;  // conv / maxpool window
  int out = 0;     // conv channels or fc width
  int stride = 1;
  int pad = 0;

  static LayerSpec conv(int k, int channels, int stride = 1, int pad = 0) { return {LayerKind::conv, k, channels, stride, pad}; }
  static LayerSpec maxpool(int k, int stride) { return {LayerKind::maxpool, k, 0, stride, 0}; }
  static LayerSpec relu() { return {LayerKind::relu}; }
  static LayerSpec flatten() { return {LayerKind::flatten}; }
  static LayerSpec fc(int width) { return {LayerKind::fc, 0, width}; }
  static LayerSpec softmax() { return {LayerKind::softmax}; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Shape3 {
  int c = 1, h = 1, w = 1;
  Eigen::Index size() const noexcept { return Eigen::Index(c) * h * w; }
  friend bool operator==(const Shape3&, const Shape3&) = default;
};

struct NetworkSpec {
  Shape3 input;
  std::vector<LayerSpec> layers;
  int classes = 2;

  /// Output shape of every layer; throws std::invalid_argument when shapes do not chain
  /// or the last layer is not a softmax over `classes`.
  std::vector<Shape3> shapes() const;
  void validate() const { (void)shapes(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// 227x227x3 AlexNet layout (ungrouped conv2) with 1000 classes.
NetworkSpec alexnet_spec();

/// Baseline: three conv(3x3)+relu+maxpool(2) blocks and two fc layers.
/// A stem > 1 prepends a stem x stem, stride-stem conv (stem_channels wide) + relu.
NetworkSpec desk_cnn_spec(Shape3 input, int classes, std::span<const int> channels, int hidden, int stem = 1,
                          int stem_channels = 4);

template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-major tensor; the network operates on a single (c, h, w) sample.
template <typename S>
struct Tensor {
  Shape3 shape;
  Vec<S> data;
};

/// Weights (out x fan_in) and biases of every conv/fc layer, in declaration order.
template <typename S>
struct ParamSet {
  std::vector<Mat<S>> weights;
  std::vector<Vec<S>> biases;

  static ParamSet zeros(const NetworkSpec& spec);
  void set_zero();
  std::size_t count() const noexcept;
  template <typename T>
  ParamSet<T> cast() const {
    ParamSet<T> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<T>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<T>());
    return out;
  }
};

template <typename S>
struct ModelParams {
  ParamSet<S> net;
  std::optional<KernelBank> bank;  // present for PH+CNN models
};

template <typename S>
struct Gradients {
  ParamSet<S> net;
  std::optional<BankGradient> bank;

  static Gradients zeros_like(const NetworkSpec& spec, const ModelParams<S>& params);
  void set_zero();
};

/// Either an image tensor (plain models) or diagram points (models with a kernel bank).
template <typename S>
struct ModelInput {
  std::span<const S> image;
  std::span<const SurvivingPoint> points;
};

template <typename S>
struct LabeledInput {
  ModelInput<S> input;
  int label = 0;
};

/// Activations kept by forward() for the backward pass.
template <typename S>
struct ForwardCache {
  std::vector<Vec<S>> activations;     // activations[0] is the network input
  std::vector<Mat<S>> columns;         // im2col buffers per conv layer
  std::vector<std::vector<Eigen::Index>> argmax;  // per maxpool layer
  FeatureVector features;              // kernel-layer output when a bank is attached
};

enum class InitScheme : std::uint8_t { he_uniform = 0, zeros = 1 };
enum class OptimizerKind : std::uint8_t { adam = 0, sgd = 1 };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  std::uint64_t seed = 1;
  InitScheme init = InitScheme::he_uniform;
  bool single_precision = true;

  void validate() const;
};

/// Fan-in scaled uniform weights (limit sqrt(6 / fan_in)), zero biases, drawn in layer order.
template <typename S>
ParamSet<S> init_params(const NetworkSpec& spec, InitScheme scheme, std::uint64_t seed);

/// Class probabilities f_1..f_M.
template <typename S>
Vec<S> forward(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input,
               ForwardCache<S>* cache = nullptr);

/// Cross-entropy gradients of one sample added into `acc`; returns the loss.
/// Requires the cache filled by forward() on the same input.
template <typename S>
S backward(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input,
           const ForwardCache<S>& cache, int label, Gradients<S>& acc);

/// forward + backward for one sample, fresh gradients.
template <typename S>
Gradients<S> gradients(const NetworkSpec& spec, const ModelParams<S>& params, const ModelInput<S>& input, int label,
                       S* loss = nullptr);

/// argmax with ties toward the lowest index.
template <typename S>
int predict(const Vec<S>& probabilities);

template <typename S>
struct OptimizerState {
  ParamSet<S> m, v;
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> bank_m_mu, bank_v_mu;
  Eigen::VectorXd bank_m_sigma, bank_v_sigma;
  long step = 0;

  static OptimizerState init(const NetworkSpec& spec, const ModelParams<S>& params);
};

/// One optimizer update on the mean batch loss; sigmas are re-clamped afterwards.
/// `correct` (optional) receives how many batch samples were predicted right before the update.
/// Throws std::runtime_error on a non-finite loss.
template <typename S>
S train_step(const NetworkSpec& spec, ModelParams<S>& params, std::span<const LabeledInput<S>> batch,
             const TrainConfig& config, OptimizerState<S>& state, int* correct = nullptr);

/// Per-layer accounting row. FLOPs are per sample times `batch`.
struct LayerCost {
  std::string name;
  std::string kernel;
  std::uint64_t params = 0;
  double forward_flops = 0.0;
  double backward_flops = 0.0;
};

struct CostTable {
  std::vector<LayerCost> rows;
  std::uint64_t total_params = 0;
  double total_forward = 0.0;
  double total_backward = 0.0;
};

/// conv: (k^2 C_in + 1) C_out params, 2 k^2 C_in C_out H_out W_out forward FLOPs;
/// fc: (in + 1) out params, 2 in out FLOPs; pool: k^2 C H_out W_out comparisons;
/// backward = 2 x forward. With ph_kernels > 0 a leading kernel-layer row is added
/// (3 params per kernel, ~12 FLOPs per kernel and diagram point).
CostTable count_params_flops(const NetworkSpec& spec, double batch = 1.0, int ph_kernels = 0, int ph_points = 0);

/// Four significant digits with a K/M/G/T suffix: 34944 -> "34.94 K", 62378344 -> "62.38 M".
std::string human_count(double value);

}  // namespace oamtopo
