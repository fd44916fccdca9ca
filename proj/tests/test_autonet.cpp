#include <cmath>
#include <vector>

#include "doctest.h"
#include "oamtopo/autonet.hpp"
#include "support.hpp"

using namespace oamtopo;

namespace {

double loss_of(const NetworkSpec& spec, const ModelParams<double>& params, const ModelInput<double>& in, int label) {
  return -std::log(forward<double>(spec, params, in)[label]);
}

// Flattened analytic and central-difference gradients over every weight, bias and kernel parameter.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gradient_pair(const NetworkSpec& spec, ModelParams<double> params,
                                                          const ModelInput<double>& in, int label) {
  const Gradients<double> g = gradients<double>(spec, params, in, label);
  std::vector<double> a, n;
  const double h = 1e-6;
  auto probe = [&](double& x, double analytic) {
    const double keep = x;
    x = keep + h;
    const double fp = loss_of(spec, params, in, label);
    x = keep - h;
    const double fm = loss_of(spec, params, in, label);
    x = keep;
    a.push_back(analytic);
    n.push_back((fp - fm) / (2 * h));
  };
  for (std::size_t s = 0; s < params.net.weights.size(); ++s) {
    for (Eigen::Index k = 0; k < params.net.weights[s].size(); ++k)
      probe(params.net.weights[s].data()[k], g.net.weights[s].data()[k]);
    for (Eigen::Index k = 0; k < params.net.biases[s].size(); ++k) probe(params.net.biases[s][k], g.net.biases[s][k]);
  }
  if (params.bank)
    for (std::size_t i = 0; i < params.bank->size(); ++i) {
      Kernel& k = params.bank->kernels[i];
      const auto row = static_cast<Eigen::Index>(i);
      probe(k.mu[0], g.bank->mu(row, 0));
      probe(k.mu[1], g.bank->mu(row, 1));
      probe(k.sigma, g.bank->sigma[row]);
    }
  return {Eigen::Map<Eigen::VectorXd>(a.data(), Eigen::Index(a.size())),
          Eigen::Map<Eigen::VectorXd>(n.data(), Eigen::Index(n.size()))};
}

}  // namespace

TEST_CASE("AlexNet layer accounting") {
  const CostTable t = count_params_flops(alexnet_spec(), 64);
  std::vector<std::uint64_t> params;
  for (const auto& r : t.rows)
    if (r.params) params.push_back(r.params);
  const std::vector<std::uint64_t> expect{34944, 614656, 885120, 1327488, 884992, 37752832, 16781312, 4097000};
  CHECK(params == expect);
  CHECK(t.total_params == 62378344);
  CHECK(std::abs(double(t.total_params) - 62.75e6) / 62.75e6 < 0.02);
  CHECK(t.total_backward == doctest::Approx(2 * t.total_forward));
  CHECK(t.total_backward > 170e9);
  CHECK(t.total_backward < 510e9);
}

TEST_CASE("human readable counts") {
  CHECK(human_count(34944) == "34.94 K");
  CHECK(human_count(62378344) == "62.38 M");
  CHECK(human_count(1327488) == "1.327 M");
  CHECK(human_count(12) == "12");
}

TEST_CASE("network shapes") {
  const auto shapes = alexnet_spec().shapes();
  CHECK(shapes.front() == Shape3{96, 55, 55});
  CHECK(shapes.back() == Shape3{1000, 1, 1});

  const std::vector<int> ch{4, 8};
  const NetworkSpec s = desk_cnn_spec({2, 32, 32}, 16, ch, 24);
  CHECK(s.shapes().back() == Shape3{16, 1, 1});
  const NetworkSpec stem = desk_cnn_spec({1, 64, 64}, 8, ch, 16, 2, 6);
  CHECK(stem.layers.front() == LayerSpec::conv(2, 6, 2));
  CHECK(stem.shapes().front() == Shape3{6, 32, 32});

  NetworkSpec bad = s;
  bad.classes = 10;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.layers.pop_back();
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  const std::vector<int> deep{4, 4, 4, 4, 4, 4};
  CHECK_THROWS_AS(desk_cnn_spec({1, 16, 16}, 4, deep, 8), std::invalid_argument);
}

TEST_CASE("golden two-layer network") {
  NetworkSpec spec;
  spec.input = {3, 1, 1};
  spec.classes = 2;
  spec.layers = {LayerSpec::fc(2), LayerSpec::relu(), LayerSpec::fc(2), LayerSpec::softmax()};
  ModelParams<double> p;
  p.net = ParamSet<double>::zeros(spec);
  p.net.weights[0] << 1, -1, 0.5, 0, 2, -1;
  p.net.biases[0] << 0.1, -0.2;
  p.net.weights[1] << 1, 1, -1, 2;
  p.net.biases[1] << 0, 0.5;
  const std::vector<double> x{1.0, 0.5, 2.0};
  ModelInput<double> in;
  in.image = x;
  // hidden = relu([1.6, -1.2]) = [1.6, 0]; logits = [1.6, -1.1]
  const Vec<double> probs = forward<double>(spec, p, in);
  const double e = std::exp(-2.7);
  CHECK(probs[0] == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-14));
  CHECK(probs[1] == doctest::Approx(e / (1.0 + e)).epsilon(1e-14));
  CHECK(predict<double>(probs) == 0);
}

TEST_CASE("predict breaks ties toward the lowest index") {
  Vec<double> p(4);
  p << 0.1, 0.4, 0.4, 0.1;
  CHECK(predict<double>(p) == 1);
}

TEST_CASE("full network gradients match central differences") {
  SplitMix64 rng(42);
  const std::vector<int> ch{3};
  const NetworkSpec spec = desk_cnn_spec({2, 8, 8}, 5, ch, 6);
  for (int trial = 0; trial < 3; ++trial) {
    ModelParams<double> p;
    p.net = init_params<double>(spec, InitScheme::he_uniform, 100 + trial);
    for (auto& b : p.net.biases)
      for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = rng.uniform(-0.1, 0.1);
    std::vector<double> img(static_cast<std::size_t>(spec.input.size()));
    for (auto& v : img) v = rng.uniform(-1.0, 1.0);
    ModelInput<double> in;
    in.image = img;
    const auto [a, n] = gradient_pair(spec, p, in, trial % 5);
    CHECK(test::rel_error(a, n) < 1e-4);
  }
}

TEST_CASE("gradients flow through the kernel bank") {
  SplitMix64 rng(9);
  NetworkSpec spec = desk_cnn_spec({4, 1, 1}, 3, {}, 5);
  for (int trial = 0; trial < 3; ++trial) {
    ModelParams<double> p;
    p.net = init_params<double>(spec, InitScheme::he_uniform, 7 + trial);
    KernelBank bank;
    bank.nu = 0.01;
    bank.norm_mode = NormMode::squared;
    for (int k = 0; k < 4; ++k) {
      Kernel ker;
      ker.dim = k % 2;
      ker.mu = Eigen::Vector2d(k % 2 ? rng.uniform(0.1, 0.4) : 0.0, rng.uniform(0.2, 0.9));
      ker.sigma = rng.uniform(0.15, 0.4);
      bank.kernels.push_back(ker);
    }
    p.bank = bank;
    std::vector<SurvivingPoint> pts;
    for (int k = 0; k < 6; ++k) {
      const int dim = k % 2;
      const double b = dim ? rng.uniform(0.1, 0.4) : 0.0;
      pts.push_back({dim, Eigen::Vector2d(b, b + rng.uniform(0.1, 0.6))});
    }
    ModelInput<double> in;
    in.points = pts;
    const auto [a, n] = gradient_pair(spec, p, in, trial);
    CHECK(test::rel_error(a, n) < 1e-4);
  }
}

TEST_CASE("initialization is seeded and bounded") {
  const std::vector<int> ch{4};
  const NetworkSpec spec = desk_cnn_spec({1, 8, 8}, 4, ch, 8);
  const auto a = init_params<double>(spec, InitScheme::he_uniform, 5);
  const auto b = init_params<double>(spec, InitScheme::he_uniform, 5);
  const auto c = init_params<double>(spec, InitScheme::he_uniform, 6);
  CHECK((a.weights[0] - b.weights[0]).norm() == 0.0);
  CHECK((a.weights[0] - c.weights[0]).norm() > 0.0);
  for (const auto& w : a.weights) CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / double(w.cols())));
  for (const auto& bias : a.biases) CHECK(bias.norm() == 0.0);
  const auto z = init_params<double>(spec, InitScheme::zeros, 5);
  for (const auto& w : z.weights) CHECK(w.norm() == 0.0);
  CHECK(a.count() == ParamSet<double>::zeros(spec).count());
}

TEST_CASE("training reduces the loss and is deterministic") {
  NetworkSpec spec = desk_cnn_spec({6, 1, 1}, 3, {}, 12);
  SplitMix64 rng(4);
  std::vector<std::vector<float>> xs;
  std::vector<int> ys;
  for (int k = 0; k < 60; ++k) {
    const int y = k % 3;
    std::vector<float> x(6);
    for (int i = 0; i < 6; ++i) x[i] = static_cast<float>(rng.uniform(-0.3, 0.3) + (i / 2 == y ? 1.0 : 0.0));
    xs.push_back(x);
    ys.push_back(y);
  }
  std::vector<LabeledInput<float>> batch;
  for (std::size_t k = 0; k < xs.size(); ++k) batch.push_back({ModelInput<float>{xs[k], {}}, ys[k]});

  auto run = [&] {
    ModelParams<float> p;
    p.net = init_params<float>(spec, InitScheme::he_uniform, 3);
    TrainConfig tc;
    tc.learning_rate = 0.01;
    OptimizerState<float> st = OptimizerState<float>::init(spec, p);
    std::vector<float> losses;
    for (int step = 0; step < 60; ++step) losses.push_back(train_step<float>(spec, p, batch, tc, st));
    return std::pair{losses, p};
  };
  const auto [l1, p1] = run();
  const auto [l2, p2] = run();
  CHECK(l1 == l2);
  CHECK(l1.back() < 0.5f * l1.front());
  int correct = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) correct += predict<float>(forward<float>(spec, p1, batch[k].input)) == ys[k];
  CHECK(correct >= 57);

  ModelParams<float> broken = p1;
  broken.net.weights[0](0, 0) = std::numeric_limits<float>::quiet_NaN();
  TrainConfig tc;
  OptimizerState<float> st = OptimizerState<float>::init(spec, broken);
  CHECK_THROWS_AS(train_step<float>(spec, broken, batch, tc, st), std::runtime_error);
}

TEST_CASE("sgd steps along the negative gradient") {
  NetworkSpec spec = desk_cnn_spec({3, 1, 1}, 2, {}, 4);
  ModelParams<double> p;
  p.net = init_params<double>(spec, InitScheme::he_uniform, 1);
  const std::vector<double> x{0.3, -0.2, 0.9};
  std::vector<LabeledInput<double>> batch{{ModelInput<double>{x, {}}, 1}};
  const Gradients<double> g = gradients<double>(spec, p, batch[0].input, 1);
  TrainConfig tc;
  tc.optimizer = OptimizerKind::sgd;
  tc.learning_rate = 0.1;
  ModelParams<double> q = p;
  OptimizerState<double> st = OptimizerState<double>::init(spec, q);
  train_step<double>(spec, q, batch, tc, st);
  CHECK((q.net.weights[0] - (p.net.weights[0] - 0.1 * g.net.weights[0])).norm() < 1e-14);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  tc = TrainConfig{};
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
}
