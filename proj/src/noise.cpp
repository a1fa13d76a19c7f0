#include "anderlab/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "anderlab/util.hpp"

namespace anderlab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// mod-n negation of a signed mode component; -n/2 maps onto itself
inline int negc(int k, int n) { return k == -n / 2 ? -n / 2 : -k; }

}  // namespace

SpectralField sample_white_noise(const TorusGrid& grid, std::uint64_t seed) {
  SpectralField xi(grid);
  const int n = grid.n;
  // Pass 1 draws the representative of every conjugate pair {k, neg(k)}
  // (the lexicographically larger one) plus the self-paired real modes;
  // pass 2 fills partners by conjugation.
  if (grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const int k = grid.mode_of_bin(b);
      const int p = negc(k, n);
      if (p == k) {
        HashRng rng(seed, k);
        xi.c[b] = cplx(rng.next_gaussian(), 0.0);
      } else if (k > p) {
        HashRng rng(seed, k);
        const auto g = rng.next_gaussian_pair();
        xi.c[b] = cplx(g[0] * kInvSqrt2, g[1] * kInvSqrt2);
      }
    }
    for (int b = 0; b < n; ++b) {
      const int k = grid.mode_of_bin(b);
      const int p = negc(k, n);
      if (k < p) xi.c[b] = std::conj(xi.c[grid.bin_of_mode(p)]);
    }
    return xi;
  }
  for (int bi = 0; bi < n; ++bi) {
    const int k0 = grid.mode_of_bin(bi);
    for (int bj = 0; bj < n; ++bj) {
      const int k1 = grid.mode_of_bin(bj);
      const int p0 = negc(k0, n), p1 = negc(k1, n);
      const bool self = p0 == k0 && p1 == k1;
      const bool rep = std::make_pair(k0, k1) > std::make_pair(p0, p1);
      if (self) {
        HashRng rng(seed, k0, k1);
        xi.at_bin(bi, bj) = cplx(rng.next_gaussian(), 0.0);
      } else if (rep) {
        HashRng rng(seed, k0, k1);
        const auto g = rng.next_gaussian_pair();
        xi.at_bin(bi, bj) = cplx(g[0] * kInvSqrt2, g[1] * kInvSqrt2);
      }
    }
  }
  for (int bi = 0; bi < n; ++bi) {
    const int k0 = grid.mode_of_bin(bi);
    for (int bj = 0; bj < n; ++bj) {
      const int k1 = grid.mode_of_bin(bj);
      const int p0 = negc(k0, n), p1 = negc(k1, n);
      if (std::make_pair(k0, k1) < std::make_pair(p0, p1))
        xi.at_bin(bi, bj) = std::conj(xi.at_bin(grid.bin_of_mode(p0), grid.bin_of_mode(p1)));
    }
  }
  return xi;
}

SpectralField mollify(const SpectralField& xi, const Mollifier& m) {
  SpectralField out(xi.grid);
  const int n = xi.grid.n;
  if (xi.grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const double k = xi.grid.mode_of_bin(b);
      out.c[b] = xi.c[b] * m.damping(k * k);
    }
  } else {
    for (int bi = 0; bi < n; ++bi) {
      const double k0 = xi.grid.mode_of_bin(bi);
      for (int bj = 0; bj < n; ++bj) {
        const double k1 = xi.grid.mode_of_bin(bj);
        out.at_bin(bi, bj) = xi.at_bin(bi, bj) * m.damping(k0 * k0 + k1 * k1);
      }
    }
  }
  return out;
}

SpectralField green_apply(const SpectralField& f) {
  SpectralField out(f.grid);
  const int n = f.grid.n;
  const double w = 4.0 * M_PI * M_PI;
  if (f.grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const double k = f.grid.mode_of_bin(b);
      out.c[b] = k == 0.0 ? cplx(0, 0) : f.c[b] / (w * k * k);
    }
  } else {
    for (int bi = 0; bi < n; ++bi) {
      const double k0 = f.grid.mode_of_bin(bi);
      for (int bj = 0; bj < n; ++bj) {
        const double k1 = f.grid.mode_of_bin(bj);
        const double ksq = k0 * k0 + k1 * k1;
        out.at_bin(bi, bj) = ksq == 0.0 ? cplx(0, 0) : f.at_bin(bi, bj) / (w * ksq);
      }
    }
  }
  return out;
}

double renorm_constant(const TorusGrid& grid, const Mollifier& m) {
  const int n = grid.n;
  const double w = 4.0 * M_PI * M_PI;
  CompensatedSum s;
  if (grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const double k = grid.mode_of_bin(b);
      if (k == 0.0) continue;
      const double d = m.damping(k * k);
      s.add(d * d / (w * k * k));
    }
  } else {
    for (int bi = 0; bi < n; ++bi) {
      const double k0 = grid.mode_of_bin(bi);
      for (int bj = 0; bj < n; ++bj) {
        const double k1 = grid.mode_of_bin(bj);
        const double ksq = k0 * k0 + k1 * k1;
        if (ksq == 0.0) continue;
        const double d = m.damping(ksq);
        s.add(d * d / (w * ksq));
      }
    }
  }
  return s.value();
}

EnhancedNoise enhance(const TorusGrid& grid, std::uint64_t seed, const Mollifier& m) {
  EnhancedNoise en;
  en.seed = seed;
  en.eps = m.eps;
  en.grid = grid;
  const SpectralField xi_hat = mollify(sample_white_noise(grid, seed), m);
  en.xi_eps = to_grid(xi_hat);
  en.c_eps = renorm_constant(grid, m);
  const GridField g_xi = to_grid(green_apply(xi_hat));
  en.second_order = GridField(grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    en.second_order.v[i] = en.xi_eps.v[i] * g_xi.v[i] - en.c_eps;
  return en;
}

double besov_regularity(const SpectralField& f, double gamma) {
  if (!std::isfinite(gamma)) throw std::invalid_argument("besov_regularity: gamma must be finite");
  const int n = f.grid.n;
  const double kmax = (f.grid.dim == 1 ? 1.0 : std::sqrt(2.0)) * (n / 2);
  const int jmax = static_cast<int>(std::ceil(std::log2(kmax))) + 1;
  double sup = 0.0;
  for (int j = 0; j <= jmax; ++j) {
    const double lo = j == 0 ? 0.0 : std::pow(2.0, j - 1);
    const double hi = j == 0 ? 1.0 : std::pow(2.0, j);
    SpectralField block(f.grid);
    bool any = false;
    if (f.grid.dim == 1) {
      for (int b = 0; b < n; ++b) {
        const double a = std::abs(static_cast<double>(f.grid.mode_of_bin(b)));
        const bool in = j == 0 ? a <= hi : (a >= lo && a < hi);
        if (in && f.c[b] != cplx(0, 0)) {
          block.c[b] = f.c[b];
          any = true;
        }
      }
    } else {
      for (int bi = 0; bi < n; ++bi) {
        const double k0 = f.grid.mode_of_bin(bi);
        for (int bj = 0; bj < n; ++bj) {
          const double k1 = f.grid.mode_of_bin(bj);
          const double a = std::sqrt(k0 * k0 + k1 * k1);
          const bool in = j == 0 ? a <= hi : (a >= lo && a < hi);
          if (in && f.at_bin(bi, bj) != cplx(0, 0)) {
            block.at_bin(bi, bj) = f.at_bin(bi, bj);
            any = true;
          }
        }
      }
    }
    if (!any) continue;
    const double amp = to_grid(block).max_abs();
    sup = std::max(sup, std::pow(2.0, j * gamma) * amp);
  }
  return sup;
}

}  // namespace anderlab
