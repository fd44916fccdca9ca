#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "oamtopo/autonet.hpp"
#include "oamtopo/binio.hpp"
#include "oamtopo/homology.hpp"
#include "oamtopo/optics.hpp"
#include "oamtopo/pipeline.hpp"
#include "oamtopo/rng.hpp"
#include "oamtopo/turbulence.hpp"
#include "oamtopo/vectorize.hpp"

using namespace oamtopo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

PointCloud3 random_cloud(SplitMix64& rng, int n) {
  PointCloud3 c(n, 3);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) c(i, k) = rng.uniform();
  return c;
}

Outcome flops_table() {
  const CostTable t = count_params_flops(alexnet_spec(), 64);
  // displayed values and the rounding unit they were printed with
  const std::vector<std::pair<double, double>> shown{{35e3, 1e3},  {615e3, 1e3}, {885e3, 1e3}, {1.33e6, 0.01e6},
                                                     {885e3, 1e3}, {38e6, 1e6},  {17e6, 1e6},  {4e6, 1e6}};
  std::vector<std::uint64_t> counted;
  for (const auto& r : t.rows)
    if (r.params) counted.push_back(r.params);
  bool ok = counted.size() == shown.size();
  for (std::size_t i = 0; ok && i < shown.size(); ++i)
    ok = std::abs(double(counted[i]) - shown[i].first) <= 0.5 * shown[i].second;
  const double total_err = std::abs(double(t.total_params) - 62.75e6) / 62.75e6;
  const double bwd_ratio = t.total_backward / 340e9;
  ok = ok && total_err <= 0.02 && bwd_ratio >= 0.5 && bwd_ratio <= 1.5;
  return {ok, "total params " + human_count(t.total_params) + " (" + fmt("%.2f%%", 100 * total_err) +
                  " off 62.75 M), backward " + fmt("%.0f", t.total_backward / 1e9) + " GFLOPs"};
}

Outcome oracle_agreement() {
  SplitMix64 rng(31337);
  int agree = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial, ++total) {
    const int n = 2 + static_cast<int>(rng.below(11));
    const int max_dim = static_cast<int>(rng.below(3));
    PointCloud3 cloud = random_cloud(rng, n);
    if (trial % 3 == 0)  // lattice clouds force tied distances
      for (Eigen::Index k = 0; k < cloud.size(); ++k) cloud.data()[k] = 0.25 * std::floor(4.0 * cloud.data()[k]);
    const double radius = rng.uniform(0.3, 1.8);
    const auto cells = rips_complex(cloud, max_dim, radius);
    agree += rips_persistence(cloud, max_dim, radius).sorted_points() ==
             oracle_persistence(cells, max_dim, radius).sorted_points();
  }
  for (int trial = 0; trial < 100; ++trial, ++total) {
    const int rows = 1 + static_cast<int>(rng.below(8)), cols = 1 + static_cast<int>(rng.below(8));
    const int levels = trial % 2 ? 0 : 2 + static_cast<int>(rng.below(5));
    RealGrid img(rows, cols);
    for (Eigen::Index k = 0; k < img.size(); ++k)
      img.data()[k] = levels ? static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) : rng.uniform();
    const PersistenceDiagram fast = cubical_persistence(img, 1);
    const auto cells = cubical_complex(img);
    agree += fast.sorted_points() ==
             oracle_persistence(cells, 1, fast.max_filtration, FiltrationMode::cubical).sorted_points();
  }
  return {agree == total, std::to_string(agree) + "/" + std::to_string(total) + " instances identical"};
}

Outcome gradient_suite() {
  SplitMix64 rng(4242);
  const double h = 1e-6;
  double worst_layer = 0.0, worst_net = 0.0;

  for (int trial = 0; trial < 10; ++trial) {
    PersistenceDiagram d;
    d.max_filtration = 1.5;
    for (int k = 0; k < 12; ++k) {
      const int dim = static_cast<int>(rng.below(2));
      const double b = dim ? rng.uniform(0.1, 0.6) : 0.0;
      d.points.push_back({dim, b, b + rng.uniform(0.05, 0.8)});
    }
    KernelBank bank;
    bank.nu = 0.02;
    bank.norm_mode = trial % 2 ? NormMode::squared : NormMode::literal;
    for (int k = 0; k < 8; ++k)
      bank.kernels.push_back({Eigen::Vector2d(rng.uniform(0.0, 0.7), rng.uniform(0.2, 1.5)), rng.uniform(0.2, 0.6),
                              static_cast<int>(rng.below(2))});
    Eigen::VectorXd up(8);
    for (int i = 0; i < 8; ++i) up[i] = rng.uniform(-1.0, 1.0);
    const BankGradient g = project_backward(d, bank, up);
    Eigen::VectorXd analytic(24), numeric(24);
    for (int i = 0; i < 8; ++i)
      for (int q = 0; q < 3; ++q) {
        Kernel& ker = bank.kernels[static_cast<std::size_t>(i)];
        double& x = q < 2 ? ker.mu[q] : ker.sigma;
        const double keep = x;
        x = keep + h;
        const double fp = up.dot(project(d, bank));
        x = keep - h;
        const double fm = up.dot(project(d, bank));
        x = keep;
        numeric[3 * i + q] = (fp - fm) / (2 * h);
        analytic[3 * i + q] = q < 2 ? g.mu(i, q) : g.sigma[i];
      }
    worst_layer = std::max(worst_layer, rel_error(analytic, numeric));
  }

  for (int trial = 0; trial < 10; ++trial) {
    const bool with_bank = trial % 2;
    const std::vector<int> ch{3};
    const NetworkSpec spec = with_bank ? desk_cnn_spec({4, 2, 2}, 4, ch, 6) : desk_cnn_spec({2, 8, 8}, 5, ch, 6);
    ModelParams<double> p;
    p.net = init_params<double>(spec, InitScheme::he_uniform, 900 + static_cast<std::uint64_t>(trial));
    for (auto& b : p.net.biases)
      for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = rng.uniform(-0.1, 0.1);
    std::vector<double> img;
    std::vector<SurvivingPoint> pts;
    ModelInput<double> in;
    if (with_bank) {
      KernelBank bank;
      bank.nu = 0.01;
      bank.norm_mode = NormMode::squared;
      for (int k = 0; k < 16; ++k) {
        const int dim = k % 2;
        bank.kernels.push_back({Eigen::Vector2d(dim ? rng.uniform(0.1, 0.4) : 0.0, rng.uniform(0.2, 0.9)),
                                rng.uniform(0.15, 0.4), dim});
      }
      p.bank = bank;
      for (int k = 0; k < 8; ++k) {
        const int dim = k % 2;
        const double b = dim ? rng.uniform(0.1, 0.4) : 0.0;
        pts.push_back({dim, Eigen::Vector2d(b, b + rng.uniform(0.1, 0.6))});
      }
      in.points = pts;
    } else {
      img.resize(static_cast<std::size_t>(spec.input.size()));
      for (auto& v : img) v = rng.uniform(-1.0, 1.0);
      in.image = img;
    }
    const int label = trial % spec.classes;
    const Gradients<double> g = gradients<double>(spec, p, in, label);
    std::vector<double> a, n;
    auto probe = [&](double& x, double analytic) {
      const double keep = x;
      x = keep + h;
      const double fp = -std::log(forward<double>(spec, p, in)[label]);
      x = keep - h;
      const double fm = -std::log(forward<double>(spec, p, in)[label]);
      x = keep;
      a.push_back(analytic);
      n.push_back((fp - fm) / (2 * h));
    };
    for (std::size_t s = 0; s < p.net.weights.size(); ++s) {
      for (Eigen::Index k = 0; k < p.net.weights[s].size(); ++k)
        probe(p.net.weights[s].data()[k], g.net.weights[s].data()[k]);
      for (Eigen::Index k = 0; k < p.net.biases[s].size(); ++k) probe(p.net.biases[s][k], g.net.biases[s][k]);
    }
    if (p.bank)
      for (std::size_t i = 0; i < p.bank->size(); ++i) {
        Kernel& k = p.bank->kernels[i];
        const auto row = static_cast<Eigen::Index>(i);
        probe(k.mu[0], g.bank->mu(row, 0));
        probe(k.mu[1], g.bank->mu(row, 1));
        probe(k.sigma, g.bank->sigma[row]);
      }
    worst_net = std::max(worst_net, rel_error(Eigen::Map<Eigen::VectorXd>(a.data(), Eigen::Index(a.size())),
                                              Eigen::Map<Eigen::VectorXd>(n.data(), Eigen::Index(n.size()))));
  }
  return {worst_layer < 1e-5 && worst_net < 1e-4,
          "worst relative error " + fmt("%.2e", worst_layer) + " (kernel layer), " + fmt("%.2e", worst_net) +
              " (end to end)"};
}

Outcome optics_suite() {
  const GridSpec g{256, 3.0};
  std::vector<ComplexField> modes;
  double worst_norm = 0.0;
  for (int l = 1; l <= 8; ++l) {
    modes.push_back(lg_field(l, g));
    worst_norm = std::max(worst_norm, std::abs(power(modes.back()) - 1.0));
  }
  double worst_off = 0.0;
  for (std::size_t i = 0; i < modes.size(); ++i)
    for (std::size_t j = i + 1; j < modes.size(); ++j)
      worst_off = std::max(worst_off, std::abs(inner_product(modes[i], modes[j])));
  int winding_ok = 0;
  for (int l = -6; l <= 6; ++l) {
    const ComplexField f = lg_field(l, g);
    winding_ok += phase_winding(f, 1.0) == l;
    worst_norm = std::max(worst_norm, std::abs(power(f) - 1.0));
  }
  return {worst_off < 1e-3 && winding_ok == 13 && worst_norm < 1e-8,
          "max |<l|m>| " + fmt("%.2e", worst_off) + ", windings " + std::to_string(winding_ok) + "/13, norm error " +
              fmt("%.1e", worst_norm)};
}

Outcome structure_function() {
  TurbulenceSpec base;
  base.level = 10.0;
  base.grid = GridSpec{256, 3.0};
  const double r0 = base.fried_pixels();
  const int seeds = 120;
  const std::vector<int> seps{8, 16, 32};
  std::vector<double> d(seps.size(), 0.0);
  for (int k = 0; k < seeds; ++k) {
    TurbulenceSpec s = base;
    s.seed = 10000 + static_cast<std::uint64_t>(k);
    const RealGrid v = phase_screen(s).values;
    const Eigen::Index side = v.rows();
    for (std::size_t i = 0; i < seps.size(); ++i) {
      const int r = seps[i];
      d[i] += 0.5 * (v.leftCols(side - r) - v.rightCols(side - r)).array().square().mean();
      d[i] += 0.5 * (v.topRows(side - r) - v.bottomRows(side - r)).array().square().mean();
    }
  }
  double worst = 0.0;
  std::string ratios;
  for (std::size_t i = 0; i < seps.size(); ++i) {
    const double ratio = d[i] / seeds / (6.88 * std::pow(seps[i] / r0, 5.0 / 3.0));
    worst = std::max(worst, std::abs(ratio - 1.0));
    ratios += (i ? ", " : "") + std::string("r=") + std::to_string(seps[i]) + " " + fmt("%.3f", ratio);
  }
  return {worst <= 0.15, "measured/theory " + ratios + " (" + std::to_string(seeds) + " seeds, r0 " +
                             fmt("%.1f", r0) + " px)"};
}

ExperimentConfig noiseless_config(const ExperimentConfig& desk) {
  ExperimentConfig c = desk;
  c.sweep.bits = {4};
  c.sweep.turbulence = {0.0};
  c.sweep.seeds = {desk.seed};
  c.samples_per_class = 120;
  return c;
}

Outcome noiseless(const ExperimentConfig& desk, const fs::path& dir) {
  const auto rows = run_sweep(noiseless_config(desk), dir / "noiseless.csv");
  bool ok = rows.size() == 2;
  std::string detail;
  for (const auto& r : rows) {
    ok = ok && r.accuracy >= 0.99;
    detail += (detail.empty() ? "" : ", ") + r.model + " " + fmt("%.4f", r.accuracy);
  }
  return {ok, detail};
}

Outcome directional(const ExperimentConfig& desk, const fs::path& dir, std::string& table) {
  const auto rows = run_sweep(desk, dir / "sweep.csv");
  std::map<std::tuple<std::string, int, double>, std::vector<double>> acc;
  for (const auto& r : rows) acc[{r.model, r.n_bits, r.turbulence}].push_back(r.accuracy);
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  };
  std::vector<double> levels = desk.sweep.turbulence;
  std::sort(levels.begin(), levels.end());
  std::vector<int> bits = desk.sweep.bits;
  std::sort(bits.begin(), bits.end());

  int violations = 0;
  for (const char* model : {"cnn", "ph_cnn"})
    for (int n : bits) {
      table += std::string("  ") + model + " n=" + std::to_string(n) + ":";
      double prev = 2.0;
      for (double t : levels) {
        const double m = median(acc[{model, n, t}]);
        table += " " + fmt("%.3f", m);
        if (m > prev) {
          ++violations;
          table += "*";
        }
        prev = m;
      }
      table += "\n";
    }

  const int top_n = bits.back();
  const double top_t = levels.back();
  std::map<std::uint64_t, double> cnn_by_seed, ph_by_seed;
  for (const auto& r : rows)
    if (r.n_bits == top_n && r.turbulence == top_t) (r.model == "cnn" ? cnn_by_seed : ph_by_seed)[r.seed] = r.accuracy;
  std::vector<double> gaps;
  for (const auto& [seed, a] : ph_by_seed)
    if (cnn_by_seed.count(seed)) gaps.push_back(a - cnn_by_seed[seed]);
  const double gap = gaps.empty() ? -1.0 : median(gaps);
  const bool a_ok = violations <= 2, b_ok = gap > 0.0;
  return {a_ok && b_ok, std::string("(a) ") + (a_ok ? "ok" : "FAILED") + ", " + std::to_string(violations) +
                            " non-monotone cells; (b) " + (b_ok ? "ok" : "FAILED") + ", median ph_cnn - cnn gap at T=" +
                            fmt("%g", top_t) + " n=" + std::to_string(top_n) + " is " + fmt("%+.4f", gap)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks; prints one PASS/FAIL line per criterion"};
  std::string work = "acceptance_run";
  std::string config_path = OAMTOPO_DESK_CONFIG;
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory for the experiment runs (wiped first)");
  app.add_option("--config", config_path, "Desk experiment config")->check(CLI::ExistingFile);
  app.add_option("--only", only, "Run only these criteria (1-8)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };

  int failures = 0;
  auto run = [&](int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
    if (!wanted(id)) return;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = budget_s <= 0.0 || secs <= budget_s;
    if (!in_time) o.detail += "; over the " + fmt("%g", budget_s) + " s budget";
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %d %s: %s [%.1f s]\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
  };

  ExperimentConfig desk;
  try {
    desk = load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load %s: %s\n", config_path.c_str(), e.what());
    return 2;
  }
  const fs::path root = fs::absolute(work);
  const fs::path first = root / "first", second = root / "second";
  if (wanted(6) || wanted(7) || wanted(8)) {
    fs::remove_all(root);
    fs::create_directories(first);
    fs::create_directories(second);
  }

  run(1, "flops table", 1.0, flops_table);
  run(2, "persistence oracle", 60.0, oracle_agreement);
  run(3, "gradients", 60.0, gradient_suite);
  run(4, "optics", 30.0, optics_suite);
  run(5, "structure function", 120.0, structure_function);
  run(6, "noiseless decode", 15 * 60.0, [&] { return noiseless(desk, first); });
  std::string table;
  run(7, "directional sweep", 2 * 3600.0, [&] {
    Outcome o = directional(desk, first, table);
    return o;
  });
  if (!table.empty()) std::printf("  median accuracy by T (* marks an increase):\n%s", table.c_str());
  run(8, "determinism", 0.0, [&] {
    if (!fs::exists(first / "noiseless.csv")) noiseless(desk, first);
    if (!fs::exists(first / "sweep.csv")) run_sweep(desk, first / "sweep.csv");
    noiseless(desk, second);
    run_sweep(desk, second / "sweep.csv");
    int same = 0;
    for (const char* f : {"noiseless.csv", "sweep.csv"}) same += read_file(first / f) == read_file(second / f);
    return Outcome{same == 2, std::to_string(same) + "/2 CSV files byte-identical on rerun"};
  });
  return failures ? 1 : 0;
}
