#include "oamtopo/optics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace oamtopo {

void GridSpec::validate() const {
  if (side < 8) throw std::invalid_argument("grid side must be >= 8, got " + std::to_string(side));
  if (!(extent > 0.0) || !std::isfinite(extent)) throw std::invalid_argument("grid extent must be > 0");
}

ModeSet ModeSet::first_adjacent(int n) {
  if (n < 1) throw std::invalid_argument("mode set needs at least one charge");
  ModeSet m;
  for (int c = 1; c <= n; ++c) m.charges.push_back(c);
  return m;
}

void ModeSet::validate() const {
  if (charges.empty()) throw std::invalid_argument("mode set is empty");
  auto sorted = charges;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("mode set charges must be distinct");
}

void Message::validate() const {
  if (n_bits < 1 || n_bits > 31) throw std::invalid_argument("message bit length out of range");
  if (value >= (std::uint32_t{1} << n_bits)) throw std::invalid_argument("message value out of range");
}

namespace {

void normalize_in_place(ComplexField& f) {
  const double p = power(f);
  if (p > 0.0) f.amplitudes /= std::sqrt(p);
}

}  // namespace

ComplexField lg_field(int charge, const GridSpec& grid) {
  grid.validate();
  ComplexField f(grid);
  const int al = std::abs(charge);
  for (int i = 0; i < grid.side; ++i) {
    const double y = grid.coord(i);
    for (int j = 0; j < grid.side; ++j) {
      const double x = grid.coord(j);
      const double r2 = x * x + y * y;
      const double radial = std::pow(std::sqrt(2.0 * r2), al) * std::exp(-r2);
      const double angle = static_cast<double>(al) * std::atan2(y, x);
      // conj symmetry between +l and -l is exact: only the sign of sin flips
      const double s = std::sin(angle);
      f.amplitudes(i, j) = cdouble(radial * std::cos(angle), charge < 0 ? -radial * s : radial * s);
    }
  }
  normalize_in_place(f);
  return f;
}

ModeBasis::ModeBasis(const ModeSet& modes, const GridSpec& grid) : modes_(modes), grid_(grid) {
  modes_.validate();
  grid_.validate();
  fields_.reserve(modes_.size());
  for (int c : modes_.charges) fields_.push_back(lg_field(c, grid_).amplitudes);
}

ComplexField ModeBasis::encode(const Message& message) const {
  message.validate();
  if (static_cast<std::size_t>(message.n_bits) != modes_.size())
    throw std::invalid_argument("message has " + std::to_string(message.n_bits) + " bits but mode set has " +
                                std::to_string(modes_.size()) + " charges");
  ComplexField f(grid_);
  for (int k = 0; k < message.n_bits; ++k)
    if (message.value & (std::uint32_t{1} << k)) f.amplitudes += fields_[static_cast<std::size_t>(k)];
  normalize_in_place(f);
  return f;
}

ComplexField encode(const Message& message, const ModeSet& modes, const GridSpec& grid) {
  return ModeBasis(modes, grid).encode(message);
}

Image intensity(const ComplexField& field) {
  Image img(field.grid);
  img.values = field.amplitudes.cwiseAbs2();
  return img;
}

Image phase(const ComplexField& field) {
  Image img(field.grid);
  const double peak = field.amplitudes.size() ? field.amplitudes.cwiseAbs().maxCoeff() : 0.0;
  const double floor = 1e-12 * peak;
  for (Eigen::Index i = 0; i < field.amplitudes.rows(); ++i)
    for (Eigen::Index j = 0; j < field.amplitudes.cols(); ++j) {
      const cdouble a = field.amplitudes(i, j);
      if (peak == 0.0 || std::abs(a) < floor) continue;
      double p = std::arg(a);
      if (p >= std::numbers::pi) p -= 2.0 * std::numbers::pi;
      img.values(i, j) = p;
    }
  return img;
}

cdouble inner_product(const ComplexField& a, const ComplexField& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("inner_product: grid mismatch");
  return (a.amplitudes.conjugate().cwiseProduct(b.amplitudes)).sum() * a.grid.pixel_area();
}

double power(const ComplexField& field) { return field.amplitudes.cwiseAbs2().sum() * field.grid.pixel_area(); }

cdouble sample(const ComplexField& field, double x, double y) {
  const GridSpec& g = field.grid;
  // continuous pixel coordinates: coord(j) == x  <=>  j = x / dx + side/2 - 1/2
  const double u = x / g.spacing() + 0.5 * g.side - 0.5;
  const double v = y / g.spacing() + 0.5 * g.side - 0.5;
  const int j0 = static_cast<int>(std::floor(u));
  const int i0 = static_cast<int>(std::floor(v));
  if (j0 < 0 || i0 < 0 || j0 + 1 >= g.side || i0 + 1 >= g.side)
    throw std::invalid_argument("sample point outside the grid");
  const double fu = u - j0;
  const double fv = v - i0;
  const auto& a = field.amplitudes;
  return (1 - fv) * ((1 - fu) * a(i0, j0) + fu * a(i0, j0 + 1)) + fv * ((1 - fu) * a(i0 + 1, j0) + fu * a(i0 + 1, j0 + 1));
}

cdouble center_amplitude(const ComplexField& field) { return sample(field, 0.0, 0.0); }

int phase_winding(const ComplexField& field, double radius) {
  const GridSpec& g = field.grid;
  // the bilinear stencil needs one full pixel of margin inside the outermost centers
  const double limit = g.extent - 1.5 * g.spacing();
  if (!(radius > 0.0) || radius > limit)
    throw std::invalid_argument("phase_winding: circle of radius " + std::to_string(radius) + " leaves the grid");
  const double circumference_px = 2.0 * std::numbers::pi * radius / g.spacing();
  const int steps = std::max(64, static_cast<int>(std::ceil(8.0 * circumference_px)));
  double total = 0.0;
  double prev = std::arg(sample(field, radius, 0.0));
  for (int k = 1; k <= steps; ++k) {
    const double t = 2.0 * std::numbers::pi * k / steps;
    const double cur = std::arg(sample(field, radius * std::cos(t), radius * std::sin(t)));
    total += std::remainder(cur - prev, 2.0 * std::numbers::pi);
    prev = cur;
  }
  return static_cast<int>(std::lround(total / (2.0 * std::numbers::pi)));
}

}  // namespace oamtopo
