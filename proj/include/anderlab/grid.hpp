// Torus grids on [0,1)^d (d = 1,2), real grid fields, spectral fields, and
// the FFT machinery connecting them. Conventions used throughout:
//
//   f(x) = sum_k c(k) exp(2*pi*i k.x),  k in {-N/2,...,N/2-1}^d
//   <f,g>_{L2} = N^{-d} sum_x f(x) g(x)          (cell-volume weighted)
//   -Laplacian symbol: 4*pi^2 |k|^2
//
// With this normalization Parseval reads |f|_{L2}^2 = sum_k |c(k)|^2.
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

namespace anderlab {

using cplx = std::complex<double>;
using Point = std::array<double, 2>;  // [0] used alone in 1D

struct TorusGrid {
  int dim = 1;
  int n = 8;  // points per axis; power of two, >= 8

  TorusGrid() = default;
  TorusGrid(int dim_, int n_);

  std::size_t size() const { return dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n; }
  double cell_volume() const { return dim == 1 ? 1.0 / n : 1.0 / (static_cast<double>(n) * n); }
  double spacing() const { return 1.0 / n; }

  // bin <-> signed Fourier mode
  int mode_of_bin(int b) const { return b <= n / 2 - 1 ? b : b - n; }
  int bin_of_mode(int k) const { return k >= 0 ? k : k + n; }

  bool operator==(const TorusGrid&) const = default;
};

struct GridField {
  TorusGrid grid;
  std::vector<double> v;

  GridField() = default;
  explicit GridField(const TorusGrid& g) : grid(g), v(g.size(), 0.0) {}
  GridField(const TorusGrid& g, std::vector<double> values);

  double& at(int i) { return v[static_cast<std::size_t>(i)]; }
  double at(int i) const { return v[static_cast<std::size_t>(i)]; }
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * grid.n + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * grid.n + j]; }

  double l2_norm() const;   // cell-volume weighted
  double l2_inner(const GridField& other) const;
  double max_abs() const;
  double min_value() const;
  double max_value() const;
  double mean() const;
};

struct SpectralField {
  TorusGrid grid;
  std::vector<cplx> c;  // DFT bin layout, row-major

  SpectralField() = default;
  explicit SpectralField(const TorusGrid& g) : grid(g), c(g.size(), cplx(0.0, 0.0)) {}

  cplx& at_bin(int b) { return c[static_cast<std::size_t>(b)]; }
  cplx at_bin(int b) const { return c[static_cast<std::size_t>(b)]; }
  cplx& at_bin(int bi, int bj) { return c[static_cast<std::size_t>(bi) * grid.n + bj]; }
  cplx at_bin(int bi, int bj) const { return c[static_cast<std::size_t>(bi) * grid.n + bj]; }

  cplx& at_mode(int k) { return c[static_cast<std::size_t>(grid.bin_of_mode(k))]; }
  cplx& at_mode(int k0, int k1) {
    return c[static_cast<std::size_t>(grid.bin_of_mode(k0)) * grid.n + grid.bin_of_mode(k1)];
  }

  double sq_norm() const;                 // sum_k |c(k)|^2
  double hermitian_defect() const;        // max |c(-k) - conj(c(k))|
};

// ---------------------------------------------------------------------------
// transforms (FFTW backend; plan cache is internal and thread-safe)
// ---------------------------------------------------------------------------
SpectralField to_spectral(const GridField& f);
GridField to_grid(const SpectralField& f);  // discards imaginary part

// raw complex transforms used by the patch machinery; data row-major,
// length n^dim, modifies nothing but `out`
void fft_forward(int dim, int n, const cplx* in, cplx* out);   // no scaling
void fft_backward(int dim, int n, const cplx* in, cplx* out);  // no scaling

// ---------------------------------------------------------------------------
// spectral calculus
// ---------------------------------------------------------------------------
SpectralField derivative(const SpectralField& f, int axis);   // d/dx_axis
SpectralField neg_laplacian(const SpectralField& f);          // 4*pi^2|k|^2 c(k)

// Evaluates the trig interpolant (and optionally its axis derivatives) on a
// tensor product of arbitrary point sets. Exact for band-limited data.
std::vector<cplx> tensor_eval(const SpectralField& f, const std::vector<double>& xs);
std::vector<cplx> tensor_eval(const SpectralField& f, const std::vector<double>& xs,
                              const std::vector<double>& ys);  // row-major xs-major

// ---------------------------------------------------------------------------
// interpolation and ball quadrature
// ---------------------------------------------------------------------------
double bilinear(const GridField& f, const Point& x);  // torus-periodic
double bicubic(const GridField& f, const Point& x);   // torus-periodic Catmull-Rom

// integral of f over the torus ball B(x0, r): polar rule with bilinear
// sampling in 2D, interval rule in 1D; exact on constants
double ball_integral(const GridField& f, const Point& x0, double r);

// torus-periodic displacement mapped to [-1/2, 1/2)
double torus_delta(double a, double b);

}  // namespace anderlab
