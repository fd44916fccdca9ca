#include "oamtopo/vectorize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace oamtopo {

void KernelBank::validate() const {
  if (kernels.empty()) throw std::invalid_argument("kernel bank is empty");
  if (!(nu >= 0.0)) throw std::invalid_argument("kernel bank nu must be >= 0");
  for (const auto& k : kernels) {
    if (k.dim < 0 || k.dim > 2) throw std::invalid_argument("kernel dimension must be in 0..2");
    if (!(k.sigma >= kSigmaMin) || !k.mu.allFinite()) throw std::invalid_argument("kernel has invalid parameters");
  }
}

void KernelBank::clamp_sigmas() noexcept {
  for (auto& k : kernels) k.sigma = std::max(k.sigma, kSigmaMin);
}

std::vector<SurvivingPoint> surviving_points(const PersistenceDiagram& diagram, double nu) {
  std::vector<SurvivingPoint> out;
  for (const auto& pt : diagram.points) {
    const double death = std::isinf(pt.death) ? diagram.max_filtration : pt.death;
    if (death - pt.birth < nu) continue;
    out.push_back({pt.dim, Eigen::Vector2d(pt.birth, death)});
  }
  return out;
}

namespace {

double kernel_value(const Kernel& k, const Eigen::Vector2d& p, NormMode mode) {
  const double r2 = (p - k.mu).squaredNorm();
  const double arg = mode == NormMode::literal ? std::sqrt(r2) : r2;
  return std::exp(-arg / (2.0 * k.sigma * k.sigma));
}

}  // namespace

double gauss(const Kernel& kernel, const PersistencePoint& point, double nu, NormMode mode, double max_filtration) {
  if (point.dim != kernel.dim) return 0.0;
  const double death = std::isinf(point.death) ? max_filtration : point.death;
  if (death - point.birth < nu) return 0.0;
  return kernel_value(kernel, Eigen::Vector2d(point.birth, death), mode);
}

FeatureVector project(std::span<const SurvivingPoint> points, const KernelBank& bank) {
  FeatureVector v = FeatureVector::Zero(static_cast<Eigen::Index>(bank.size()));
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const Kernel& k = bank.kernels[i];
    double sum = 0.0;
    for (const auto& sp : points)
      if (sp.dim == k.dim) sum += kernel_value(k, sp.p, bank.norm_mode);
    v[static_cast<Eigen::Index>(i)] = sum;
  }
  return v;
}

FeatureVector project(const PersistenceDiagram& diagram, const KernelBank& bank) {
  const auto pts = surviving_points(diagram, bank.nu);
  return project(pts, bank);
}

BankGradient project_backward(std::span<const SurvivingPoint> points, const KernelBank& bank,
                              const Eigen::VectorXd& upstream) {
  if (upstream.size() != static_cast<Eigen::Index>(bank.size()))
    throw std::invalid_argument("project_backward: upstream length does not match bank size");
  BankGradient grad(bank.size());
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double g = upstream[static_cast<Eigen::Index>(i)];
    if (g == 0.0) continue;
    const Kernel& k = bank.kernels[i];
    const double s2 = k.sigma * k.sigma;
    const double s3 = s2 * k.sigma;
    Eigen::Vector2d dmu = Eigen::Vector2d::Zero();
    double dsigma = 0.0;
    for (const auto& sp : points) {
      if (sp.dim != k.dim) continue;
      const Eigen::Vector2d diff = sp.p - k.mu;
      const double r2 = diff.squaredNorm();
      if (bank.norm_mode == NormMode::literal) {
        const double r = std::sqrt(r2);
        const double val = std::exp(-r / (2.0 * s2));
        if (r > 0.0) dmu += val * diff / (2.0 * s2 * r);
        dsigma += val * r / s3;
      } else {
        const double val = std::exp(-r2 / (2.0 * s2));
        dmu += val * diff / s2;
        dsigma += val * r2 / s3;
      }
    }
    grad.mu.row(static_cast<Eigen::Index>(i)) = g * dmu.transpose();
    grad.sigma[static_cast<Eigen::Index>(i)] = g * dsigma;
  }
  return grad;
}

BankGradient project_backward(const PersistenceDiagram& diagram, const KernelBank& bank,
                              const Eigen::VectorXd& upstream) {
  const auto pts = surviving_points(diagram, bank.nu);
  return project_backward(pts, bank, upstream);
}

std::vector<int> even_split(int n, int dims) {
  if (dims < 1) throw std::invalid_argument("even_split needs at least one dimension");
  std::vector<int> out(static_cast<std::size_t>(dims), n / dims);
  for (int d = 0; d < n % dims; ++d) ++out[static_cast<std::size_t>(d)];
  return out;
}

namespace {

void lay_out(std::vector<Kernel>& out, int count, int dim, double b_lo, double b_hi, double d_lo, double d_hi) {
  constexpr double eps = 1e-12;
  const bool flat_b = b_hi - b_lo < eps;
  const bool flat_d = d_hi - d_lo < eps;
  if (flat_b && flat_d) {
    const double b = 0.5 * (b_lo + b_hi), d = 0.5 * (d_lo + d_hi);
    b_lo = b - 0.5, b_hi = b + 0.5, d_lo = d - 0.5, d_hi = d + 0.5;
  }
  int cols, rows;
  if (flat_b && !flat_d) {
    cols = 1, rows = count;
  } else if (flat_d && !flat_b) {
    cols = count, rows = 1;
  } else {
    cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    rows = (count + cols - 1) / cols;
  }
  // a flat axis keeps every center on its single value; spacing comes from the other axis
  const double sb = (b_hi - b_lo) / (cols + 1);
  const double sd = (d_hi - d_lo) / (rows + 1);
  double spacing;
  if (flat_b && !flat_d)
    spacing = sd;
  else if (flat_d && !flat_b)
    spacing = sb;
  else
    spacing = std::min(sb, sd);
  const double sigma = std::max(0.5 * spacing, kSigmaMin);
  for (int m = 0; m < count; ++m) {
    const int r = m / cols, c = m % cols;
    Kernel k;
    k.dim = dim;
    k.mu[0] = (flat_b && !flat_d) ? b_lo : b_lo + (c + 1) * sb;
    k.mu[1] = (flat_d && !flat_b) ? d_lo : d_lo + (r + 1) * sd;
    k.sigma = sigma;
    out.push_back(k);
  }
}

}  // namespace

KernelBank init_bank(int n, std::span<const int> per_dim_counts, std::span<const PersistenceDiagram> samples, double nu,
                     NormMode mode) {
  if (n < 1) throw std::invalid_argument("init_bank: N must be >= 1");
  if (per_dim_counts.empty() || per_dim_counts.size() > 3)
    throw std::invalid_argument("init_bank: need counts for 1 to 3 homology dimensions");
  if (static_cast<std::size_t>(n) < per_dim_counts.size())
    throw std::invalid_argument("init_bank: N=" + std::to_string(n) + " is smaller than the number of dimensions");
  if (std::accumulate(per_dim_counts.begin(), per_dim_counts.end(), 0) != n ||
      std::any_of(per_dim_counts.begin(), per_dim_counts.end(), [](int c) { return c < 0; }))
    throw std::invalid_argument("init_bank: per-dimension counts must be non-negative and sum to N");

  KernelBank bank;
  bank.nu = nu;
  bank.norm_mode = mode;
  for (std::size_t dim = 0; dim < per_dim_counts.size(); ++dim) {
    const int count = per_dim_counts[dim];
    if (count == 0) continue;
    double b_lo = std::numeric_limits<double>::infinity(), b_hi = -b_lo, d_lo = b_lo, d_hi = -b_lo;
    bool any = false;
    for (const auto& diagram : samples)
      for (const auto& sp : surviving_points(diagram, nu)) {
        if (sp.dim != static_cast<int>(dim)) continue;
        any = true;
        b_lo = std::min(b_lo, sp.p[0]), b_hi = std::max(b_hi, sp.p[0]);
        d_lo = std::min(d_lo, sp.p[1]), d_hi = std::max(d_hi, sp.p[1]);
      }
    if (!any) b_lo = 0.0, b_hi = 1.0, d_lo = 0.0, d_hi = 1.0;
    lay_out(bank.kernels, count, static_cast<int>(dim), b_lo, b_hi, d_lo, d_hi);
  }
  return bank;
}

}  // namespace oamtopo
