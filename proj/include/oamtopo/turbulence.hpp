#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oamtopo/optics.hpp"

namespace oamtopo {

/// Receiver-plane turbulence. level T = D / r0 where D is the aperture in pixels.
struct TurbulenceSpec {
  double level = 0.0;
  GridSpec grid;
  double aperture = 0.0;        // pixels; <= 0 means the full grid width
  std::uint64_t seed = 0;
  double propagation = 0.0;     // free-space leg after the screen, in Rayleigh ranges

  double aperture_pixels() const noexcept { return aperture > 0.0 ? aperture : static_cast<double>(grid.side); }
  /// Fried parameter in pixels; infinite when level == 0.
  double fried_pixels() const noexcept;
  void validate() const;
};

/// Kolmogorov phase screen (radians), piston removed. Zero for level 0.
Image phase_screen(const TurbulenceSpec& spec);

/// field * exp(i * screen)
ComplexField apply(const ComplexField& field, const Image& screen);

/// Paraxial angular-spectrum propagation over `rayleigh_ranges` z_R (periodic window).
ComplexField propagate(const ComplexField& field, double rayleigh_ranges);

/// apply(field, phase_screen(spec)), optional propagation, then circular complex
/// Gaussian noise with E|n|^2 = noise_sigma^2 drawn from seed ^ noise tag.
ComplexField channel(const ComplexField& field, const TurbulenceSpec& spec, double noise_sigma);

/// In-place 2-D FFT on a square grid. Inverse is unscaled.
void fft2(ComplexGrid& data, bool inverse);

/// Debug export: "PHSC", u16 side, u16 reserved, side*side f32 LE row-major.
std::vector<std::uint8_t> encode_screen(const Image& screen);
Image decode_screen(std::span<const std::uint8_t> bytes, double extent);

}  // namespace oamtopo
