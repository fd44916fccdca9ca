#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oamtopo/optics.hpp"

using namespace oamtopo;

TEST_CASE("fundamental mode is a centered real Gaussian") {
  const GridSpec g{64, 3.0};
  const ComplexField f = lg_field(0, g);
  CHECK(f.amplitudes.imag().cwiseAbs().maxCoeff() < 1e-15);
  CHECK(f.amplitudes.real().minCoeff() > 0.0);
  Eigen::Index i, j;
  f.amplitudes.real().maxCoeff(&i, &j);
  CHECK((i == 31 || i == 32));
  CHECK((j == 31 || j == 32));
  CHECK(phase_winding(f, 1.0) == 0);
}

TEST_CASE("charge 2 has a vortex null and winds twice") {
  const GridSpec g{128, 3.0};
  const ComplexField f = lg_field(2, g);
  const double peak = f.amplitudes.cwiseAbs().maxCoeff();
  CHECK(std::abs(center_amplitude(f)) < 1e-6 * peak);
  CHECK(phase_winding(f, 1.0) == 2);
}

TEST_CASE("modes are unit norm and windings are exact") {
  const GridSpec g{128, 3.0};
  for (int l = -6; l <= 6; ++l) {
    const ComplexField f = lg_field(l, g);
    CHECK(std::abs(power(f) - 1.0) < 1e-8);
    CHECK(phase_winding(f, 1.0) == l);
  }
}

TEST_CASE("opposite charges are complex conjugates") {
  const GridSpec g{32, 3.0};
  for (int l = 1; l <= 4; ++l) CHECK((lg_field(-l, g).amplitudes - lg_field(l, g).amplitudes.conjugate()).norm() == 0.0);
}

TEST_CASE("distinct charges are orthogonal on the grid") {
  const GridSpec g{128, 3.0};
  for (int a = 1; a <= 5; ++a)
    for (int b = a + 1; b <= 5; ++b) CHECK(std::abs(inner_product(lg_field(a, g), lg_field(b, g))) < 1e-3);
}

TEST_CASE("encode superposes the set bits with equal weight") {
  const GridSpec g{32, 3.0};
  const ModeSet modes = ModeSet::first_adjacent(3);
  const ComplexField f = encode(Message{0b101, 3}, modes, g);
  ComplexGrid expect = lg_field(1, g).amplitudes + lg_field(3, g).amplitudes;
  expect /= std::sqrt(expect.cwiseAbs2().sum() * g.pixel_area());
  CHECK((f.amplitudes - expect).norm() < 1e-12);
  CHECK(std::abs(power(f) - 1.0) < 1e-12);
  CHECK(encode(Message{0, 3}, modes, g).amplitudes.norm() == 0.0);

  const ModeBasis basis(modes, g);
  for (std::uint32_t m = 0; m < 8; ++m)
    CHECK((basis.encode(Message{m, 3}).amplitudes - encode(Message{m, 3}, modes, g).amplitudes).norm() == 0.0);
}

TEST_CASE("intensity and phase images") {
  const GridSpec g{48, 3.0};
  const ComplexField f = encode(Message{0b110, 3}, ModeSet::first_adjacent(3), g);
  const Image I = intensity(f);
  const Image P = phase(f);
  CHECK(I.values.minCoeff() >= 0.0);
  CHECK(P.values.minCoeff() >= -std::numbers::pi);
  CHECK(P.values.maxCoeff() < std::numbers::pi);

  CHECK(phase(lg_field(0, g)).values.cwiseAbs().maxCoeff() == 0.0);

  ComplexField shifted = f;
  shifted.amplitudes *= std::polar(1.0, std::numbers::pi / 3);
  const Image Q = phase(shifted);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < P.values.size(); ++k) {
    if (std::abs(f.amplitudes.data()[k]) < 1e-9) continue;
    const double d = std::remainder(Q.values.data()[k] - P.values.data()[k] - std::numbers::pi / 3, 2 * std::numbers::pi);
    worst = std::max(worst, std::abs(d));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(lg_field(1, GridSpec{4, 3.0}), std::invalid_argument);
  CHECK_THROWS_AS(lg_field(1, GridSpec{32, -1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ModeSet({{1, 2, 2}}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(encode(Message{8, 3}, ModeSet::first_adjacent(3), GridSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(encode(Message{1, 2}, ModeSet::first_adjacent(3), GridSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(phase_winding(lg_field(1, GridSpec{64, 3.0}), 3.0), std::invalid_argument);
  CHECK_THROWS_AS(inner_product(lg_field(1, GridSpec{32, 3.0}), lg_field(1, GridSpec{64, 3.0})), std::invalid_argument);
}
