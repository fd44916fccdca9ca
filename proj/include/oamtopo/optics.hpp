#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace oamtopo {

using cdouble = std::complex<double>;
using ComplexGrid = Eigen::Matrix<cdouble, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealGrid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Square sampling window. Lengths are in units of the beam waist w0.
/// Pixel centers sit at (j + 1/2 - side/2) * spacing(), symmetric about the origin.
/// Row index maps to y, column index to x.
struct GridSpec {
  int side = 64;
  double extent = 3.0;  // half-width of the window

  double spacing() const noexcept { return 2.0 * extent / side; }
  double coord(int j) const noexcept { return (j + 0.5 - 0.5 * side) * spacing(); }
  double pixel_area() const noexcept { return spacing() * spacing(); }
  void validate() const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Ordered, distinct topological charges c_1..c_n.
struct ModeSet {
  std::vector<int> charges;

  /// {1, 2, ..., n}
  static ModeSet first_adjacent(int n);
  std::size_t size() const noexcept { return charges.size(); }
  void validate() const;
};

/// n-bit message, 0 <= value < 2^n_bits.
struct Message {
  std::uint32_t value = 0;
  int n_bits = 1;

  void validate() const;
};

struct ComplexField {
  GridSpec grid;
  ComplexGrid amplitudes;

  ComplexField() = default;
  explicit ComplexField(const GridSpec& g) : grid(g), amplitudes(ComplexGrid::Zero(g.side, g.side)) {}
};

struct Image {
  GridSpec grid;
  RealGrid values;

  Image() = default;
  explicit Image(const GridSpec& g) : grid(g), values(RealGrid::Zero(g.side, g.side)) {}
};

/// Waist-plane LG_{p=0,l}: (sqrt(2) r)^|l| exp(-r^2) exp(i l phi), unit L2 norm on the grid.
ComplexField lg_field(int charge, const GridSpec& grid);

/// Equal-amplitude superposition of the modes whose bits are set (bit k -> charges[k]).
/// Message 0 yields the zero field.
ComplexField encode(const Message& message, const ModeSet& modes, const GridSpec& grid);

/// Precomputed mode fields; encode() through a basis is identical to the free function.
class ModeBasis {
 public:
  ModeBasis(const ModeSet& modes, const GridSpec& grid);

  ComplexField encode(const Message& message) const;
  const GridSpec& grid() const noexcept { return grid_; }
  const ModeSet& modes() const noexcept { return modes_; }

 private:
  ModeSet modes_;
  GridSpec grid_;
  std::vector<ComplexGrid> fields_;
};

Image intensity(const ComplexField& field);

/// Pixelwise argument in [-pi, pi); pixels below 1e-12 of the peak magnitude are 0.
Image phase(const ComplexField& field);

/// sum conj(a) * b * dx^2
cdouble inner_product(const ComplexField& a, const ComplexField& b);

/// sum |a|^2 dx^2
double power(const ComplexField& field);

/// Bilinear interpolation of the field at physical coordinates (x, y).
cdouble sample(const ComplexField& field, double x, double y);

/// Field value at the origin (bilinear mean of the central pixels for even sides).
cdouble center_amplitude(const ComplexField& field);

/// Net phase winding along the centered circle of the given radius.
/// Throws std::invalid_argument when the circle leaves the interpolable window.
int phase_winding(const ComplexField& field, double radius);

}  // namespace oamtopo
