#include <cmath>

#include "doctest.h"
#include "oamtopo/turbulence.hpp"

using namespace oamtopo;

namespace {

TurbulenceSpec spec_for(double level, std::uint64_t seed, int side = 64) {
  TurbulenceSpec s;
  s.level = level;
  s.seed = seed;
  s.grid = GridSpec{side, 3.0};
  return s;
}

double second_moment(const ComplexField& f) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < f.grid.side; ++i)
    for (int j = 0; j < f.grid.side; ++j) {
      const double w = std::norm(f.amplitudes(i, j));
      num += w * (f.grid.coord(i) * f.grid.coord(i) + f.grid.coord(j) * f.grid.coord(j));
      den += w;
    }
  return num / den;
}

}  // namespace

TEST_CASE("zero turbulence gives the zero screen") {
  CHECK(phase_screen(spec_for(0.0, 7)).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("screens are deterministic per seed and piston-free") {
  const Image a = phase_screen(spec_for(5.0, 11));
  const Image b = phase_screen(spec_for(5.0, 11));
  const Image c = phase_screen(spec_for(5.0, 12));
  CHECK((a.values - b.values).norm() == 0.0);
  CHECK((a.values - c.values).norm() > 0.0);
  CHECK(std::abs(a.values.mean()) < 1e-10);
  CHECK(a.values.allFinite());
}

TEST_CASE("a pure phase screen keeps intensity and energy") {
  const GridSpec g{64, 3.0};
  const ComplexField f = encode(Message{0b1011, 4}, ModeSet::first_adjacent(4), g);
  const ComplexField out = apply(f, phase_screen(spec_for(10.0, 3)));
  CHECK((intensity(out).values - intensity(f).values).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(power(out) - power(f)) < 1e-10);
  CHECK_THROWS_AS(apply(f, phase_screen(spec_for(1.0, 1, 32))), std::invalid_argument);
}

TEST_CASE("channel without noise equals the screen applied") {
  const GridSpec g{64, 3.0};
  const ComplexField f = lg_field(3, g);
  const TurbulenceSpec s = spec_for(6.0, 99);
  CHECK((channel(f, s, 0.0).amplitudes - apply(f, phase_screen(s)).amplitudes).norm() == 0.0);
}

TEST_CASE("channel noise has the requested power and is seeded") {
  const GridSpec g{64, 3.0};
  const ComplexField f = lg_field(1, g);
  const TurbulenceSpec s = spec_for(2.0, 5);
  const double sigma = 0.05;
  const ComplexField a = channel(f, s, sigma);
  const ComplexField b = channel(f, s, sigma);
  CHECK((a.amplitudes - b.amplitudes).norm() == 0.0);
  const double mean_power = (a.amplitudes - apply(f, phase_screen(s)).amplitudes).cwiseAbs2().mean();
  CHECK(mean_power == doctest::Approx(sigma * sigma).epsilon(0.06));
  CHECK_THROWS_AS(channel(f, s, -1.0), std::invalid_argument);
}

TEST_CASE("phase variance over a sub-aperture grows with turbulence") {
  double last = 0.0;
  for (double level : {1.0, 5.0, 10.0, 21.0}) {
    double var = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Image s = phase_screen(spec_for(level, 1000 + seed, 32));
      const auto block = s.values.block(8, 8, 16, 16);
      var += (block.array() - block.mean()).square().mean();
    }
    CHECK(var > last);
    last = var;
  }
}

TEST_CASE("structure function follows the Kolmogorov law") {
  const int side = 64;
  const TurbulenceSpec base = spec_for(10.0, 0, side);
  const double r0 = base.fried_pixels();
  for (int r : {4, 8}) {
    double d = 0.0;
    const int seeds = 200;
    for (int k = 0; k < seeds; ++k) {
      TurbulenceSpec s = base;
      s.seed = 500 + static_cast<std::uint64_t>(k);
      const RealGrid v = phase_screen(s).values;
      d += 0.5 * (v.leftCols(side - r) - v.rightCols(side - r)).array().square().mean();
      d += 0.5 * (v.topRows(side - r) - v.bottomRows(side - r)).array().square().mean();
    }
    d /= seeds;
    CHECK(d == doctest::Approx(6.88 * std::pow(r / r0, 5.0 / 3.0)).epsilon(0.15));
  }
}

TEST_CASE("fft2 round trip and propagation") {
  const GridSpec g{64, 3.0};
  ComplexField f = lg_field(2, g);
  ComplexGrid copy = f.amplitudes;
  fft2(copy, false);
  fft2(copy, true);
  copy /= 64.0 * 64.0;
  CHECK((copy - f.amplitudes).norm() < 1e-12);

  CHECK((propagate(f, 0.0).amplitudes - f.amplitudes).norm() == 0.0);
  const ComplexField p = propagate(f, 0.5);
  CHECK(std::abs(power(p) - 1.0) < 1e-10);

  // a Gaussian beam's mean squared radius doubles after one Rayleigh range
  const ComplexField gauss = lg_field(0, g);
  CHECK(second_moment(propagate(gauss, 1.0)) / second_moment(gauss) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("PHSC screen export round trip") {
  const Image s = phase_screen(spec_for(4.0, 8, 32));
  const auto bytes = encode_screen(s);
  CHECK(bytes.size() == 8 + 32 * 32 * 4);
  const Image back = decode_screen(bytes, 3.0);
  CHECK((back.values - s.values).cwiseAbs().maxCoeff() < 1e-5);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_screen(bad, 3.0), std::runtime_error);
  bad = bytes;
  bad.push_back(0);
  CHECK_THROWS_AS(decode_screen(bad, 3.0), std::runtime_error);
}

TEST_CASE("invalid turbulence specs are rejected") {
  CHECK_THROWS_AS(phase_screen(spec_for(-1.0, 1)), std::invalid_argument);
  TurbulenceSpec s = spec_for(1.0, 1);
  s.propagation = -0.5;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}
