#include "anderlab/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "anderlab/util.hpp"

namespace anderlab {

namespace {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Plans are created once per (dim, n, sign) and executed through the
// new-array interface, which is safe to call concurrently. FFTW_UNALIGNED
// lets us execute on ordinary std::vector storage.
struct PlanCache {
  std::mutex mtx;
  std::map<std::tuple<int, int, int>, fftw_plan> plans;

  fftw_plan get(int dim, int n, int sign) {
    std::lock_guard<std::mutex> lock(mtx);
    const auto key = std::make_tuple(dim, n, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    const std::size_t sz = dim == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    std::vector<cplx> a(sz), b(sz);
    auto* pa = reinterpret_cast<fftw_complex*>(a.data());
    auto* pb = reinterpret_cast<fftw_complex*>(b.data());
    fftw_plan p = dim == 1
                      ? fftw_plan_dft_1d(n, pa, pb, sign, FFTW_ESTIMATE | FFTW_UNALIGNED)
                      : fftw_plan_dft_2d(n, n, pa, pb, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plans.emplace(key, p);
    return p;
  }
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void execute(int dim, int n, int sign, const cplx* in, cplx* out) {
  fftw_plan p = plan_cache().get(dim, n, sign);
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

}  // namespace

TorusGrid::TorusGrid(int dim_, int n_) : dim(dim_), n(n_) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("TorusGrid: dim must be 1 or 2");
  if (n < 8 || !is_power_of_two(n)) throw std::invalid_argument("TorusGrid: n must be a power of two >= 8");
}

GridField::GridField(const TorusGrid& g, std::vector<double> values) : grid(g), v(std::move(values)) {
  if (v.size() != grid.size()) throw std::invalid_argument("GridField: size mismatch");
}

double GridField::l2_norm() const {
  CompensatedSum s;
  for (double x : v) s.add(x * x);
  return std::sqrt(s.value() * grid.cell_volume());
}

double GridField::l2_inner(const GridField& other) const {
  if (!(grid == other.grid)) throw std::invalid_argument("l2_inner: grid mismatch");
  CompensatedSum s;
  for (std::size_t i = 0; i < v.size(); ++i) s.add(v[i] * other.v[i]);
  return s.value() * grid.cell_volume();
}

double GridField::max_abs() const {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double GridField::min_value() const {
  double m = v.empty() ? 0.0 : v[0];
  for (double x : v) m = std::min(m, x);
  return m;
}

double GridField::max_value() const {
  double m = v.empty() ? 0.0 : v[0];
  for (double x : v) m = std::max(m, x);
  return m;
}

double GridField::mean() const {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

double SpectralField::sq_norm() const {
  CompensatedSum s;
  for (const cplx& z : c) s.add(std::norm(z));
  return s.value();
}

double SpectralField::hermitian_defect() const {
  const int n = grid.n;
  double worst = 0.0;
  if (grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const int bc = (n - b) % n;
      worst = std::max(worst, std::abs(c[b] - std::conj(c[bc])));
    }
  } else {
    for (int bi = 0; bi < n; ++bi)
      for (int bj = 0; bj < n; ++bj) {
        const int ci = (n - bi) % n, cj = (n - bj) % n;
        worst = std::max(worst, std::abs(at_bin(bi, bj) - std::conj(c[static_cast<std::size_t>(ci) * n + cj])));
      }
  }
  return worst;
}

SpectralField to_spectral(const GridField& f) {
  const std::size_t sz = f.grid.size();
  std::vector<cplx> in(sz);
  for (std::size_t i = 0; i < sz; ++i) in[i] = cplx(f.v[i], 0.0);
  SpectralField out(f.grid);
  execute(f.grid.dim, f.grid.n, FFTW_FORWARD, in.data(), out.c.data());
  const double scale = 1.0 / static_cast<double>(sz);
  for (cplx& z : out.c) z *= scale;
  return out;
}

GridField to_grid(const SpectralField& f) {
  const std::size_t sz = f.grid.size();
  std::vector<cplx> out(sz);
  execute(f.grid.dim, f.grid.n, FFTW_BACKWARD, f.c.data(), out.data());
  GridField g(f.grid);
  for (std::size_t i = 0; i < sz; ++i) g.v[i] = out[i].real();
  return g;
}

void fft_forward(int dim, int n, const cplx* in, cplx* out) { execute(dim, n, FFTW_FORWARD, in, out); }
void fft_backward(int dim, int n, const cplx* in, cplx* out) { execute(dim, n, FFTW_BACKWARD, in, out); }

SpectralField derivative(const SpectralField& f, int axis) {
  if (axis < 0 || axis >= f.grid.dim) throw std::invalid_argument("derivative: bad axis");
  SpectralField out(f.grid);
  const int n = f.grid.n;
  const cplx two_pi_i(0.0, 2.0 * M_PI);
  // the odd symbol is zeroed on the unpaired -n/2 mode so real fields keep
  // their Hermitian symmetry under differentiation
  if (f.grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const int k = f.grid.mode_of_bin(b);
      out.c[b] = k == -n / 2 ? cplx(0, 0) : two_pi_i * static_cast<double>(k) * f.c[b];
    }
  } else {
    for (int bi = 0; bi < n; ++bi) {
      const int ki = f.grid.mode_of_bin(bi);
      for (int bj = 0; bj < n; ++bj) {
        const int kj = f.grid.mode_of_bin(bj);
        const int k = axis == 0 ? ki : kj;
        out.at_bin(bi, bj) =
            k == -n / 2 ? cplx(0, 0) : two_pi_i * static_cast<double>(k) * f.at_bin(bi, bj);
      }
    }
  }
  return out;
}

SpectralField neg_laplacian(const SpectralField& f) {
  SpectralField out(f.grid);
  const int n = f.grid.n;
  const double w = 4.0 * M_PI * M_PI;
  if (f.grid.dim == 1) {
    for (int b = 0; b < n; ++b) {
      const double k = f.grid.mode_of_bin(b);
      out.c[b] = w * k * k * f.c[b];
    }
  } else {
    for (int bi = 0; bi < n; ++bi) {
      const double ki = f.grid.mode_of_bin(bi);
      for (int bj = 0; bj < n; ++bj) {
        const double kj = f.grid.mode_of_bin(bj);
        out.at_bin(bi, bj) = w * (ki * ki + kj * kj) * f.at_bin(bi, bj);
      }
    }
  }
  return out;
}

std::vector<cplx> tensor_eval(const SpectralField& f, const std::vector<double>& xs) {
  if (f.grid.dim != 1) throw std::invalid_argument("tensor_eval(1D): field is not 1D");
  const int n = f.grid.n;
  std::vector<cplx> out(xs.size(), cplx(0, 0));
  for (std::size_t p = 0; p < xs.size(); ++p) {
    cplx acc(0, 0);
    for (int b = 0; b < n; ++b) {
      const double k = f.grid.mode_of_bin(b);
      acc += f.c[b] * std::polar(1.0, 2.0 * M_PI * k * xs[p]);
    }
    out[p] = acc;
  }
  return out;
}

std::vector<cplx> tensor_eval(const SpectralField& f, const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  if (f.grid.dim != 2) throw std::invalid_argument("tensor_eval(2D): field is not 2D");
  const int n = f.grid.n;
  const std::size_t mx = xs.size(), my = ys.size();
  // two-stage contraction: first over k1 (columns), then over k0 (rows)
  std::vector<cplx> ey(static_cast<std::size_t>(n) * my);
  for (int bj = 0; bj < n; ++bj) {
    const double kj = f.grid.mode_of_bin(bj);
    for (std::size_t q = 0; q < my; ++q)
      ey[static_cast<std::size_t>(bj) * my + q] = std::polar(1.0, 2.0 * M_PI * kj * ys[q]);
  }
  std::vector<cplx> partial(static_cast<std::size_t>(n) * my, cplx(0, 0));
  for (int bi = 0; bi < n; ++bi) {
    for (int bj = 0; bj < n; ++bj) {
      const cplx coef = f.at_bin(bi, bj);
      if (coef == cplx(0.0, 0.0)) continue;
      const cplx* row = &ey[static_cast<std::size_t>(bj) * my];
      cplx* dst = &partial[static_cast<std::size_t>(bi) * my];
      for (std::size_t q = 0; q < my; ++q) dst[q] += coef * row[q];
    }
  }
  std::vector<cplx> out(mx * my, cplx(0, 0));
  std::vector<cplx> ex(static_cast<std::size_t>(n));
  for (std::size_t p = 0; p < mx; ++p) {
    for (int bi = 0; bi < n; ++bi)
      ex[bi] = std::polar(1.0, 2.0 * M_PI * f.grid.mode_of_bin(bi) * xs[p]);
    for (int bi = 0; bi < n; ++bi) {
      const cplx e = ex[bi];
      const cplx* src = &partial[static_cast<std::size_t>(bi) * my];
      cplx* dst = &out[p * my];
      for (std::size_t q = 0; q < my; ++q) dst[q] += e * src[q];
    }
  }
  return out;
}

double torus_delta(double a, double b) {
  double d = a - b;
  d -= std::floor(d + 0.5);
  return d;
}

namespace {

inline double wrap01(double x) { return x - std::floor(x); }

}  // namespace

double bilinear(const GridField& f, const Point& x) {
  const int n = f.grid.n;
  if (f.grid.dim == 1) {
    const double t = wrap01(x[0]) * n;
    const int i0 = static_cast<int>(std::floor(t));
    const double a = t - i0;
    const int i1 = (i0 + 1) % n;
    return (1.0 - a) * f.at(i0 % n) + a * f.at(i1);
  }
  const double tx = wrap01(x[0]) * n, ty = wrap01(x[1]) * n;
  const int i0 = static_cast<int>(std::floor(tx)) % n;
  const int j0 = static_cast<int>(std::floor(ty)) % n;
  const double a = tx - std::floor(tx), b = ty - std::floor(ty);
  const int i1 = (i0 + 1) % n, j1 = (j0 + 1) % n;
  return (1 - a) * (1 - b) * f.at(i0, j0) + a * (1 - b) * f.at(i1, j0) +
         (1 - a) * b * f.at(i0, j1) + a * b * f.at(i1, j1);
}

namespace {

// Catmull-Rom weights for parameter t in [0,1)
inline void catmull_rom(double t, double w[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2 * t2 - t);
  w[1] = 0.5 * (3 * t3 - 5 * t2 + 2);
  w[2] = 0.5 * (-3 * t3 + 4 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
}

}  // namespace

double bicubic(const GridField& f, const Point& x) {
  const int n = f.grid.n;
  if (f.grid.dim == 1) {
    const double t = wrap01(x[0]) * n;
    const int i = static_cast<int>(std::floor(t));
    double w[4];
    catmull_rom(t - i, w);
    double acc = 0.0;
    for (int s = -1; s <= 2; ++s) acc += w[s + 1] * f.at(((i + s) % n + n) % n);
    return acc;
  }
  const double tx = wrap01(x[0]) * n, ty = wrap01(x[1]) * n;
  const int i = static_cast<int>(std::floor(tx)), j = static_cast<int>(std::floor(ty));
  double wx[4], wy[4];
  catmull_rom(tx - i, wx);
  catmull_rom(ty - j, wy);
  double acc = 0.0;
  for (int si = -1; si <= 2; ++si) {
    const int ii = ((i + si) % n + n) % n;
    double row = 0.0;
    for (int sj = -1; sj <= 2; ++sj) {
      const int jj = ((j + sj) % n + n) % n;
      row += wy[sj + 1] * f.at(ii, jj);
    }
    acc += wx[si + 1] * row;
  }
  return acc;
}

double ball_integral(const GridField& f, const Point& x0, double r) {
  if (r <= 0.0) return 0.0;
  const int n = f.grid.n;
  if (f.grid.dim == 1) {
    const int nn = std::max(33, 2 * static_cast<int>(std::ceil(2.0 * r * n)) + 1);
    const double h = 2.0 * r / (nn - 1);
    CompensatedSum s;
    for (int i = 0; i < nn; ++i) {
      const double w = (i == 0 || i == nn - 1) ? 0.5 : 1.0;
      s.add(w * bilinear(f, {x0[0] - r + i * h, 0.0}));
    }
    return s.value() * h;
  }
  // polar rule: trapezoid in radius (integrand s*f vanishes at s=0), uniform
  // angles; exact on constants
  const int na = 64;
  const int nr = std::max(16, static_cast<int>(std::ceil(4.0 * r * n)));
  const double dr = r / nr, da = 2.0 * M_PI / na;
  CompensatedSum s;
  for (int ir = 0; ir <= nr; ++ir) {
    const double rad = ir * dr;
    const double wr = (ir == 0 || ir == nr) ? 0.5 : 1.0;
    CompensatedSum ring;
    for (int ia = 0; ia < na; ++ia) {
      const double ang = ia * da;
      ring.add(bilinear(f, {x0[0] + rad * std::cos(ang), x0[1] + rad * std::sin(ang)}));
    }
    s.add(wr * rad * ring.value());
  }
  return s.value() * dr * da;
}

}  // namespace anderlab
