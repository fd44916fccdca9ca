#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <tuple>

#include "oamtopo/homology.hpp"

namespace oamtopo {

std::size_t PersistenceDiagram::count(int dim) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [dim](const PersistencePoint& p) { return p.dim == dim; }));
}

std::vector<PersistencePoint> PersistenceDiagram::sorted_points() const {
  auto out = points;
  std::sort(out.begin(), out.end(), [](const PersistencePoint& a, const PersistencePoint& b) {
    return std::tie(a.dim, a.birth, a.death) < std::tie(b.dim, b.birth, b.death);
  });
  return out;
}

void FiltrationParams::validate() const {
  if (max_dim < 0 || max_dim > 2) throw std::invalid_argument("filtration max_dim must be in 0..2");
  if (!(max_radius > 0.0)) throw std::invalid_argument("filtration max_radius must be > 0");
  if (!(tau >= 0.0 && tau < 1.0)) throw std::invalid_argument("filtration tau must be in [0, 1)");
  if (max_points < 4) throw std::invalid_argument("filtration max_points must be >= 4");
  if (!(alpha > 0.0)) throw std::invalid_argument("filtration alpha must be > 0");
  if (mode == FiltrationMode::rips && max_points > 512)
    throw std::invalid_argument("rips filtration requires max_points <= 512");
  if (mode == FiltrationMode::cubical && max_dim > 1)
    throw std::invalid_argument("cubical filtration supports max_dim <= 1");
}

Eigen::MatrixXd distance_matrix(const PointCloud3& cloud) {
  const Eigen::Index n = cloud.rows();
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (cloud.row(i) - cloud.row(j)).norm();
  }
  return d;
}

PointCloud3 image_to_cloud(const Image& img, const FiltrationParams& params) {
  params.validate();
  const auto& v = img.values;
  if (v.size() == 0) return PointCloud3(0, 3);
  if ((v.array() < 0.0).any()) throw std::invalid_argument("image_to_cloud expects a non-negative intensity image");
  const double peak = v.maxCoeff();
  if (!(peak > 0.0)) return PointCloud3(0, 3);

  const Eigen::Index cols = v.cols();
  const double side = static_cast<double>(img.grid.side > 0 ? img.grid.side : cols);
  std::vector<Eigen::Index> candidates;
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (v.data()[k] / peak > params.tau) candidates.push_back(k);

  auto lift = [&](Eigen::Index k) {
    const Eigen::Index i = k / cols, j = k % cols;
    return Eigen::RowVector3d(static_cast<double>(j) / side, static_cast<double>(i) / side,
                              params.alpha * v(i, j) / peak);
  };

  const auto limit = static_cast<std::size_t>(params.max_points);
  if (candidates.size() <= limit) {
    PointCloud3 cloud(static_cast<Eigen::Index>(candidates.size()), 3);
    for (std::size_t m = 0; m < candidates.size(); ++m) cloud.row(static_cast<Eigen::Index>(m)) = lift(candidates[m]);
    return cloud;
  }

  // farthest-point sampling from the brightest candidate
  PointCloud3 all(static_cast<Eigen::Index>(candidates.size()), 3);
  for (std::size_t m = 0; m < candidates.size(); ++m) all.row(static_cast<Eigen::Index>(m)) = lift(candidates[m]);
  std::size_t start = 0;
  for (std::size_t m = 1; m < candidates.size(); ++m)
    if (v.data()[candidates[m]] > v.data()[candidates[start]]) start = m;

  PointCloud3 cloud(static_cast<Eigen::Index>(limit), 3);
  std::vector<double> nearest(candidates.size(), std::numeric_limits<double>::infinity());
  std::size_t current = start;
  for (std::size_t m = 0; m < limit; ++m) {
    cloud.row(static_cast<Eigen::Index>(m)) = all.row(static_cast<Eigen::Index>(current));
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double d = (all.row(static_cast<Eigen::Index>(c)) - all.row(static_cast<Eigen::Index>(current))).squaredNorm();
      nearest[c] = std::min(nearest[c], d);
      if (nearest[c] > best) {
        best = nearest[c];
        next = c;
      }
    }
    current = next;
  }
  return cloud;
}

PersistenceDiagram compute_diagram(const Image& img, const FiltrationParams& params) {
  params.validate();
  if (params.mode == FiltrationMode::cubical) return cubical_persistence(img, params.max_dim);
  return rips_persistence(image_to_cloud(img, params), params.max_dim, params.max_radius);
}

}  // namespace oamtopo
