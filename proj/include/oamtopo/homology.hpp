#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "oamtopo/optics.hpp"

namespace oamtopo {

enum class FiltrationMode : std::uint8_t { rips = 0, cubical = 1 };

/// One interval of a persistence diagram. death == +inf only for essential H0 classes.
struct PersistencePoint {
  int dim = 0;
  double birth = 0.0;
  double death = std::numeric_limits<double>::infinity();

  double lifetime() const noexcept { return death - birth; }
  friend bool operator==(const PersistencePoint&, const PersistencePoint&) = default;
};

struct PersistenceDiagram {
  std::vector<PersistencePoint> points;
  double max_filtration = 0.0;  // stands in for +inf deaths downstream
  FiltrationMode source_mode = FiltrationMode::rips;

  std::size_t count(int dim) const noexcept;
  /// Points sorted by (dim, birth, death); the canonical multiset form used for comparisons.
  std::vector<PersistencePoint> sorted_points() const;
};

/// Rows are (x, y, h) with x, y in [0, 1) and h = alpha * I / I_max.
using PointCloud3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

struct FiltrationParams {
  FiltrationMode mode = FiltrationMode::rips;
  int max_dim = 2;
  double max_radius = 1.5;
  double tau = 0.2;
  int max_points = 192;
  double alpha = 0.5;

  void validate() const;
};

/// Lifts bright pixels into R^3. More than max_points candidates are thinned by farthest-point
/// sampling started at the brightest pixel (lowest index on ties).
PointCloud3 image_to_cloud(const Image& img, const FiltrationParams& params);

/// Pairwise Euclidean distances of the cloud rows.
Eigen::MatrixXd distance_matrix(const PointCloud3& cloud);

/// Vietoris-Rips persistence, filtration value = simplex diameter. Cohomology reduction with
/// clearing and the emergent-pair shortcut over an implicitly enumerated complex.
/// Classes of dim >= 1 still alive at max_radius get death = max_radius.
PersistenceDiagram rips_persistence(const PointCloud3& cloud, int max_dim, double max_radius);

/// Sublevel persistence of f = -img on the V-construction cubical complex (H0, H1).
PersistenceDiagram cubical_persistence(const RealGrid& img, int max_dim);
PersistenceDiagram cubical_persistence(const Image& img, int max_dim);

/// Dispatches on params.mode; the image is an intensity image.
PersistenceDiagram compute_diagram(const Image& img, const FiltrationParams& params);

/// A cell of an explicit filtered complex. `vertices` is sorted ascending and is only used
/// for tie-breaking; `boundary` lists indices of earlier cells.
struct FiltrationCell {
  int dim = 0;
  double value = 0.0;
  std::vector<int> vertices;
  std::vector<std::size_t> boundary;
};

/// Naive column-by-column GF(2) boundary reduction. The input must be sorted by
/// (value, dim, lexicographic vertices) with every face before its cofaces; otherwise throws.
/// Unpaired classes of dim >= 1 (up to max_dim) die at max_filtration; H0 ones at +inf.
PersistenceDiagram oracle_persistence(std::span<const FiltrationCell> cells, int max_dim, double max_filtration,
                                      FiltrationMode mode = FiltrationMode::rips);

/// Explicit Rips complex up to dimension max_dim + 1, in oracle order.
std::vector<FiltrationCell> rips_complex(const PointCloud3& cloud, int max_dim, double max_radius);

/// Explicit V-construction cubical complex of f = -img, in oracle order.
std::vector<FiltrationCell> cubical_complex(const RealGrid& img);

}  // namespace oamtopo
