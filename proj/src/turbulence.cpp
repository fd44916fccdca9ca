#include "oamtopo/turbulence.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

#include "oamtopo/binio.hpp"
#include "oamtopo/rng.hpp"

namespace oamtopo {

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f6973655f7631ULL;  // "noise_v1"
constexpr int kSubharmonicLevels = 3;

// Kolmogorov phase PSD with frequency in cycles per pixel.
double kolmogorov_psd(double f, double r0) { return 0.023 * std::pow(r0, -5.0 / 3.0) * std::pow(f, -11.0 / 3.0); }

// Mean of the PSD (r0 = 1) over the square frequency cell of width w centered at (fx, fy).
// The spectrum is steep near the origin, so the center value alone underweights the lowest cells.
double cell_psd(double fx, double fy, double w) {
  const int m = std::hypot(fx, fy) < 3.0 * w ? 16 : 4;
  double sum = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      sum += kolmogorov_psd(std::hypot(fx + w * ((i + 0.5) / m - 0.5), fy + w * ((j + 0.5) / m - 0.5)), 1.0);
  return sum / (m * m);
}

}  // namespace

double TurbulenceSpec::fried_pixels() const noexcept {
  return level > 0.0 ? aperture_pixels() / level : std::numeric_limits<double>::infinity();
}

void TurbulenceSpec::validate() const {
  grid.validate();
  if (!(level >= 0.0) || !std::isfinite(level)) throw std::invalid_argument("turbulence level must be >= 0");
  if (!(propagation >= 0.0) || !std::isfinite(propagation)) throw std::invalid_argument("propagation must be >= 0");
}

namespace {

// FFTW planning is not thread-safe; execution of an existing plan is. Each thread keeps
// in-place plans on its own buffer, created under a global lock.
std::mutex g_planner_mutex;

struct Plan2 {
  int rows = 0, cols = 0;
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr, inv = nullptr;

  Plan2(int r, int c) : rows(r), cols(c) {
    std::lock_guard lock(g_planner_mutex);
    buf = fftw_alloc_complex(static_cast<std::size_t>(r) * c);
    fwd = fftw_plan_dft_2d(r, c, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    inv = fftw_plan_dft_2d(r, c, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~Plan2() {
    std::lock_guard lock(g_planner_mutex);
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(buf);
  }
  Plan2(const Plan2&) = delete;
  Plan2& operator=(const Plan2&) = delete;
};

Plan2& plan_for(int rows, int cols) {
  thread_local std::vector<std::unique_ptr<Plan2>> plans;
  for (auto& p : plans)
    if (p->rows == rows && p->cols == cols) return *p;
  plans.push_back(std::make_unique<Plan2>(rows, cols));
  return *plans.back();
}

}  // namespace

void fft2(ComplexGrid& data, bool inverse) {
  if (data.size() == 0) return;
  Plan2& p = plan_for(static_cast<int>(data.rows()), static_cast<int>(data.cols()));
  const std::size_t bytes = sizeof(cdouble) * static_cast<std::size_t>(data.size());
  std::memcpy(static_cast<void*>(p.buf), static_cast<const void*>(data.data()), bytes);
  fftw_execute(inverse ? p.inv : p.fwd);
  std::memcpy(static_cast<void*>(data.data()), static_cast<const void*>(p.buf), bytes);
}

Image phase_screen(const TurbulenceSpec& spec) {
  spec.validate();
  const GridSpec& g = spec.grid;
  Image screen(g);
  if (spec.level == 0.0) return screen;

  const int n = g.side;
  const double r0 = spec.fried_pixels();
  const double df = 1.0 / n;
  SplitMix64 rng(spec.seed);

  // sqrt(cell-averaged PSD) * df with the r0 factor pulled out; depends on the side only
  thread_local RealGrid amplitude;
  if (amplitude.rows() != n) {
    amplitude.resize(n, n);
    for (int a = 0; a < n; ++a) {
      const double fy = (a < n / 2 ? a : a - n) * df;
      for (int b = 0; b < n; ++b) {
        const double fx = (b < n / 2 ? b : b - n) * df;
        const double f = std::hypot(fx, fy);
        amplitude(a, b) = f > 0.0 ? std::sqrt(cell_psd(fx, fy, df)) * df : 0.0;
      }
    }
  }
  const double r0_scale = std::pow(r0, -5.0 / 6.0);
  thread_local std::vector<double> sub_amplitude;
  thread_local int sub_side = 0;
  if (sub_side != n) {
    sub_amplitude.clear();
    for (int p = 1; p <= kSubharmonicLevels; ++p) {
      const double dfp = df / std::pow(3.0, p);
      for (int a = -1; a <= 1; ++a)
        for (int b = -1; b <= 1; ++b)
          if (a != 0 || b != 0) sub_amplitude.push_back(std::sqrt(cell_psd(b * dfp, a * dfp, dfp)) * dfp);
    }
    sub_side = n;
  }
  ComplexGrid spectrum(n, n);
  for (Eigen::Index k = 0; k < spectrum.size(); ++k)
    spectrum.data()[k] = rng.complex_normal() * (amplitude.data()[k] * r0_scale);
  fft2(spectrum, /*inverse=*/true);
  screen.values = spectrum.real();

  // subharmonics: 3x3 patches at df / 3^p, evaluated separably on centered pixel coordinates.
  // Re(c ey_i ex_j) = Re(c ey_i) Re(ex_j) - Im(c ey_i) Im(ex_j): two rank-1 updates per patch.
  Eigen::VectorXd ex_re(n), ex_im(n), cy_re(n), cy_im(n);
  RealGrid low = RealGrid::Zero(n, n);
  std::size_t cell = 0;
  for (int p = 1; p <= kSubharmonicLevels; ++p) {
    const double dfp = df / std::pow(3.0, p);
    for (int a = -1; a <= 1; ++a) {
      for (int b = -1; b <= 1; ++b) {
        if (a == 0 && b == 0) continue;
        const cdouble c = rng.complex_normal() * (sub_amplitude[cell++] * r0_scale);
        for (int k = 0; k < n; ++k) {
          const double pos = k - 0.5 * n;
          const cdouble ex = std::polar(1.0, 2.0 * std::numbers::pi * dfp * b * pos);
          const cdouble cy = c * std::polar(1.0, 2.0 * std::numbers::pi * dfp * a * pos);
          ex_re[k] = ex.real();
          ex_im[k] = ex.imag();
          cy_re[k] = cy.real();
          cy_im[k] = cy.imag();
        }
        low.noalias() += cy_re * ex_re.transpose();
        low.noalias() -= cy_im * ex_im.transpose();
      }
    }
  }
  screen.values += low;
  screen.values.array() -= screen.values.mean();
  return screen;
}

ComplexField apply(const ComplexField& field, const Image& screen) {
  if (!(field.grid == screen.grid)) throw std::invalid_argument("apply: grid mismatch between field and screen");
  ComplexField out(field.grid);
  for (Eigen::Index i = 0; i < field.amplitudes.rows(); ++i)
    for (Eigen::Index j = 0; j < field.amplitudes.cols(); ++j) {
      const double s = screen.values(i, j);
      out.amplitudes(i, j) = s == 0.0 ? field.amplitudes(i, j) : field.amplitudes(i, j) * std::polar(1.0, s);
    }
  return out;
}

ComplexField propagate(const ComplexField& field, double rayleigh_ranges) {
  if (rayleigh_ranges == 0.0) return field;
  const GridSpec& g = field.grid;
  const int n = g.side;
  ComplexField out = field;
  fft2(out.amplitudes, false);
  thread_local struct {
    int n = 0;
    double spacing = 0.0, z = 0.0;
    ComplexGrid h;
  } transfer;
  if (transfer.n != n || transfer.spacing != g.spacing() || transfer.z != rayleigh_ranges) {
    const double df = 1.0 / (n * g.spacing());  // cycles per waist
    const double k = std::numbers::pi * std::numbers::pi * rayleigh_ranges;
    transfer.h.resize(n, n);
    for (int a = 0; a < n; ++a) {
      const double fy = (a < n / 2 ? a : a - n) * df;
      for (int b = 0; b < n; ++b) {
        const double fx = (b < n / 2 ? b : b - n) * df;
        transfer.h(a, b) = std::polar(1.0, -k * (fx * fx + fy * fy));
      }
    }
    transfer.n = n;
    transfer.spacing = g.spacing();
    transfer.z = rayleigh_ranges;
  }
  out.amplitudes.array() *= transfer.h.array();
  fft2(out.amplitudes, true);
  out.amplitudes /= static_cast<double>(n) * n;
  return out;
}

ComplexField channel(const ComplexField& field, const TurbulenceSpec& spec, double noise_sigma) {
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("noise_sigma must be >= 0");
  ComplexField out = apply(field, phase_screen(spec));
  if (spec.propagation > 0.0) out = propagate(out, spec.propagation);
  if (noise_sigma > 0.0) {
    SplitMix64 rng(spec.seed ^ kNoiseTag);
    const double s = noise_sigma / std::numbers::sqrt2;
    for (Eigen::Index i = 0; i < out.amplitudes.rows(); ++i)
      for (Eigen::Index j = 0; j < out.amplitudes.cols(); ++j) out.amplitudes(i, j) += rng.complex_normal() * s;
  }
  return out;
}

std::vector<std::uint8_t> encode_screen(const Image& screen) {
  const int side = screen.grid.side;
  if (side > 0xffff) throw std::invalid_argument("screen too large for PHSC export");
  ByteWriter w;
  w.bytes("PHSC");
  w.u16(static_cast<std::uint16_t>(side));
  w.u16(0);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) w.f32(static_cast<float>(screen.values(i, j)));
  return std::move(w.data());
}

Image decode_screen(std::span<const std::uint8_t> bytes, double extent) {
  ByteReader r(bytes);
  if (r.bytes(4) != "PHSC") throw std::runtime_error("not a PHSC screen file");
  const int side = r.u16();
  r.u16();
  Image img(GridSpec{side, extent});
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) img.values(i, j) = r.f32();
  if (!r.at_end()) throw std::runtime_error("trailing bytes in PHSC screen file");
  return img;
}

}  // namespace oamtopo
