#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "oamtopo/homology.hpp"

namespace oamtopo {

/// literal: exp(-|p - mu| / (2 sigma^2)); squared: exp(-|p - mu|^2 / (2 sigma^2)).
enum class NormMode : std::uint8_t { literal = 0, squared = 1 };

inline constexpr double kSigmaMin = 1e-3;

/// Gaussian kernel over (birth, death) coordinates reading one homology dimension.
struct Kernel {
  Eigen::Vector2d mu = Eigen::Vector2d::Zero();
  double sigma = 1.0;
  int dim = 0;
};

struct KernelBank {
  std::vector<Kernel> kernels;
  double nu = 0.1;  // lifetimes below nu are pruned
  NormMode norm_mode = NormMode::literal;

  std::size_t size() const noexcept { return kernels.size(); }
  void validate() const;
  void clamp_sigmas() noexcept;
};

using FeatureVector = Eigen::VectorXd;

/// Diagram point with +inf deaths replaced by the diagram's max_filtration.
struct SurvivingPoint {
  int dim;
  Eigen::Vector2d p;
};

/// Points whose (capped) lifetime is >= nu.
std::vector<SurvivingPoint> surviving_points(const PersistenceDiagram& diagram, double nu);

/// One kernel evaluated at one point; 0 on dimension mismatch or lifetime < nu.
double gauss(const Kernel& kernel, const PersistencePoint& point, double nu, NormMode mode,
             double max_filtration = std::numeric_limits<double>::infinity());

/// v_i = sum_j G_i(p_j)
FeatureVector project(const PersistenceDiagram& diagram, const KernelBank& bank);
FeatureVector project(std::span<const SurvivingPoint> points, const KernelBank& bank);

struct BankGradient {
  Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor> mu;
  Eigen::VectorXd sigma;

  explicit BankGradient(std::size_t n = 0) : mu(Eigen::Index(n), 2), sigma(Eigen::Index(n)) {
    mu.setZero();
    sigma.setZero();
  }
};

/// Chain rule through project(): upstream holds dL/dv. In literal mode dG/dmu is taken as 0 at p == mu.
BankGradient project_backward(const PersistenceDiagram& diagram, const KernelBank& bank,
                              const Eigen::VectorXd& upstream);
BankGradient project_backward(std::span<const SurvivingPoint> points, const KernelBank& bank,
                              const Eigen::VectorXd& upstream);

/// Splits n kernels over `dims` homology dimensions as evenly as possible, lower dims first.
std::vector<int> even_split(int n, int dims);

/// Kernel centers on a uniform grid over the bounding box of surviving points of each dimension
/// (unit box when a dimension has none); sigma is half the grid spacing.
KernelBank init_bank(int n, std::span<const int> per_dim_counts, std::span<const PersistenceDiagram> samples,
                     double nu = 0.1, NormMode mode = NormMode::literal);

}  // namespace oamtopo
