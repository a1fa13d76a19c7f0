// White noise on the torus, Gaussian mollification, the zero-mean inverse
// Laplacian, the renormalization constant, and enhanced-noise assembly.
//
// Noise is sampled directly in Fourier variables: one standard Gaussian per
// real degree of freedom, drawn from a per-mode counter RNG keyed on
// (seed, k). Realizations are therefore independent of traversal order and
// consistent across grid resolutions on shared modes.
#pragma once

#include <cstdint>

#include "anderlab/grid.hpp"

namespace anderlab {

struct Mollifier {
  double eps = 0.0;  // eps = 0 is the identity

  // Fourier damping rho_hat(eps*k) = exp(-2 pi^2 eps^2 |k|^2)
  double damping(double k_sq) const { return std::exp(-2.0 * M_PI * M_PI * eps * eps * k_sq); }
};

struct EnhancedNoise {
  std::uint64_t seed = 0;
  double eps = 0.0;
  TorusGrid grid;
  GridField xi_eps;        // mollified noise on the grid
  double c_eps = 0.0;      // renormalization constant
  GridField second_order;  // xi_eps * (G xi_eps) - c_eps, pointwise
};

SpectralField sample_white_noise(const TorusGrid& grid, std::uint64_t seed);

SpectralField mollify(const SpectralField& xi, const Mollifier& m);

// G = (-Laplacian)^{-1} with G(constant) = 0
SpectralField green_apply(const SpectralField& f);

// c_eps = sum_{k != 0} rho_hat(eps k)^2 / (4 pi^2 |k|^2) over grid modes
double renorm_constant(const TorusGrid& grid, const Mollifier& m);

EnhancedNoise enhance(const TorusGrid& grid, std::uint64_t seed, const Mollifier& m);

// sup_j 2^{j gamma} |Delta_j f|_inf over dyadic frequency blocks
// (j = 0 block: |k| <= 1; block j >= 1: 2^{j-1} <= |k| < 2^j)
double besov_regularity(const SpectralField& f, double gamma);

}  // namespace anderlab
