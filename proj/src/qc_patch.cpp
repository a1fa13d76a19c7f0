// Patch geometry, exact torus sampling, spectral Wirtinger derivatives,
// the adjoint gauge, the stream function, and the Beltrami coefficient.
#include <cmath>
#include <stdexcept>

#include "anderlab/qc.hpp"
#include "anderlab/util.hpp"

namespace anderlab {

namespace {

inline double wrap01(double x) { return x - std::floor(x); }

// C-infinity partition profile: 1 at t <= 0, 0 at t >= 1
double smooth_step_down(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / (1.0 - t));
  const double b = std::exp(-1.0 / t);
  return a / (a + b);
}

}  // namespace

DiscPatch::DiscPatch(const Point& c, double r, int m_) : center(c), radius(r), m(m_) {
  if (r <= 0.0 || r > 0.125) throw std::invalid_argument("DiscPatch: radius outside (0, 1/8]");
  if (m < 64 || (m & (m - 1)) != 0) throw std::invalid_argument("DiscPatch: m must be a power of two >= 64");
}

double DiscPatch::taper(double rad) const {
  return smooth_step_down((rad - taper_inner()) / (taper_outer() - taper_inner()));
}

double DiscPatch::node_radius(int i, int j) const {
  const double x = coord(i), y = coord(j);
  return std::sqrt(x * x + y * y);
}

PatchField sample_patch(const SpectralField& torus_field, const DiscPatch& p) {
  if (torus_field.grid.dim != 2) throw std::invalid_argument("sample_patch: 2D fields only");
  std::vector<double> xs(p.m), ys(p.m);
  for (int i = 0; i < p.m; ++i) {
    xs[i] = wrap01(p.center[0] + p.coord(i));
    ys[i] = wrap01(p.center[1] + p.coord(i));
  }
  PatchField out(p);
  out.v = tensor_eval(torus_field, xs, ys);
  return out;
}

WirtingerPair wirtinger(const PatchField& f) {
  const DiscPatch& p = f.patch;
  const int m = p.m;
  const std::size_t sz = p.size();
  std::vector<cplx> tapered(sz), hat(sz);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      tapered[static_cast<std::size_t>(i) * m + j] = f.at(i, j) * p.taper(p.node_radius(i, j));
  fft_forward(2, m, tapered.data(), hat.data());

  WirtingerPair out{PatchField(p), PatchField(p)};
  std::vector<cplx> dhat(sz), dbhat(sz);
  const double wfreq = M_PI / p.half_width();  // period 2L
  auto kint = [m](int b) { return b <= m / 2 - 1 ? b : b - m; };
  for (int bi = 0; bi < m; ++bi) {
    const double wx = wfreq * kint(bi);
    for (int bj = 0; bj < m; ++bj) {
      const double wy = wfreq * kint(bj);
      const std::size_t c_idx = static_cast<std::size_t>(bi) * m + bj;
      if (bi == m / 2 || bj == m / 2) {
        // unpaired Nyquist modes break the conjugation symmetry of odd
        // derivatives; they carry no resolved content for tapered data
        dhat[c_idx] = dbhat[c_idx] = cplx(0, 0);
        continue;
      }
      const cplx zeta(wx, wy);
      const cplx c = hat[c_idx];
      dhat[c_idx] = cplx(0, 0.5) * std::conj(zeta) * c;
      dbhat[c_idx] = cplx(0, 0.5) * zeta * c;
    }
  }
  std::vector<cplx> tmp(sz);
  const double scale = 1.0 / static_cast<double>(sz);
  fft_backward(2, m, dhat.data(), tmp.data());
  for (std::size_t i = 0; i < sz; ++i) out.d.v[i] = tmp[i] * scale;
  fft_backward(2, m, dbhat.data(), tmp.data());
  for (std::size_t i = 0; i < sz; ++i) out.dbar.v[i] = tmp[i] * scale;
  return out;
}

// ---------------------------------------------------------------------------
// finite-difference solves on the disc
// ---------------------------------------------------------------------------
namespace {

struct DiscMask {
  int m = 0;
  std::vector<int> idx;                    // node -> interior index or -1
  std::vector<std::pair<int, int>> nodes;  // interior node list

  DiscMask(const DiscPatch& p, double rmax) : m(p.m), idx(p.size(), -1) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (p.node_radius(i, j) < rmax) {
          idx[static_cast<std::size_t>(i) * m + j] = static_cast<int>(nodes.size());
          nodes.emplace_back(i, j);
        }
  }
  int at(int i, int j) const {
    if (i < 0 || i >= m || j < 0 || j >= m) return -1;
    return idx[static_cast<std::size_t>(i) * m + j];
  }
};

class PositivityFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// (L x)_c = sum_edges a_e (x_c - x_nb)/h^2 - kappa a_c x_c with zero data on
// exterior nodes; SPD exactly when kappa is below the first Dirichlet
// eigenvalue of the weighted laplacian
struct DiscOperator {
  const DiscMask& mask;
  const std::vector<double>& a;
  double h, kappa;

  void apply(const std::vector<double>& x, std::vector<double>& out) const {
    const int m = mask.m;
    const double inv_h2 = 1.0 / (h * h);
    for (std::size_t c = 0; c < mask.nodes.size(); ++c) {
      const auto [i, j] = mask.nodes[c];
      const double ac = a[static_cast<std::size_t>(i) * m + j];
      double acc = -kappa * ac * x[c];
      const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
      for (int d = 0; d < 4; ++d) {
        const int ni = i + di[d], nj = j + dj[d];
        if (ni < 0 || ni >= m || nj < 0 || nj >= m) continue;
        const double ae = 0.5 * (ac + a[static_cast<std::size_t>(ni) * m + nj]);
        const int nb = mask.at(ni, nj);
        acc += ae * inv_h2 * (x[c] - (nb >= 0 ? x[nb] : 0.0));
      }
      out[c] = acc;
    }
  }
};

// plain CG; throws PositivityFailure when the operator turns indefinite
std::vector<double> cg_solve(const DiscOperator& op, const std::vector<double>& b, double tol,
                             int max_iter) {
  const std::size_t n = b.size();
  std::vector<double> x(n, 0.0), r = b, p = b, Ap(n);
  double rr = 0.0;
  for (double v : r) rr += v * v;
  const double stop = tol * tol * rr;
  for (int it = 0; it < max_iter && rr > stop; ++it) {
    op.apply(p, Ap);
    double pAp = 0.0;
    for (std::size_t i = 0; i < n; ++i) pAp += p[i] * Ap[i];
    if (pAp <= 0.0) throw PositivityFailure("disc operator indefinite");
    const double alpha = rr / pAp;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
      rr_new += r[i] * r[i];
    }
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  if (rr > stop) throw std::runtime_error("cg_solve: no convergence");
  return x;
}

}  // namespace

std::vector<double> adjoint_gauge(const std::vector<double>& z_patch, const DiscPatch& p,
                                  double kappa) {
  if (z_patch.size() != p.size()) throw std::invalid_argument("adjoint_gauge: size mismatch");
  if (kappa < 0.0) throw std::invalid_argument("adjoint_gauge: kappa must be nonnegative");
  const int m = p.m;
  std::vector<double> a(p.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(2.0 * z_patch[i]);

  std::vector<double> psi(p.size(), 1.0);
  if (kappa == 0.0) return psi;  // constants solve the equation exactly

  const DiscMask mask(p, p.radius);
  const DiscOperator op{mask, a, p.spacing(), kappa};
  // boundary data psi = 1 enters through edges that leave the mask
  std::vector<double> b(mask.nodes.size(), 0.0);
  const double inv_h2 = 1.0 / (p.spacing() * p.spacing());
  for (std::size_t c = 0; c < mask.nodes.size(); ++c) {
    const auto [i, j] = mask.nodes[c];
    const double ac = a[static_cast<std::size_t>(i) * m + j];
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int ni = i + di[d], nj = j + dj[d];
      if (ni < 0 || ni >= m || nj < 0 || nj >= m) continue;
      if (mask.at(ni, nj) < 0) {
        const double ae = 0.5 * (ac + a[static_cast<std::size_t>(ni) * m + nj]);
        b[c] += ae * inv_h2;
      }
    }
  }
  std::vector<double> x;
  try {
    x = cg_solve(op, b, 1e-12, 40 * m * m);
  } catch (const PositivityFailure&) {
    throw std::runtime_error("adjoint_gauge: patch too large for lambda");
  }
  double mn = 1.0;
  for (std::size_t c = 0; c < mask.nodes.size(); ++c) {
    const auto [i, j] = mask.nodes[c];
    psi[static_cast<std::size_t>(i) * m + j] = x[c];
    mn = std::min(mn, x[c]);
  }
  if (mn <= 0.0) throw std::runtime_error("adjoint_gauge: patch too large for lambda");
  return psi;
}

double dirichlet_ground_eigenvalue(const std::vector<double>& z_patch, const DiscPatch& p) {
  const int m = p.m;
  std::vector<double> a(p.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(2.0 * z_patch[i]);
  const DiscMask mask(p, p.radius);
  const DiscOperator stiff{mask, a, p.spacing(), 0.0};
  const std::size_t n = mask.nodes.size();

  // inverse power iteration for L0 x = lambda M x with M = diag(a)
  std::vector<double> y(n, 1.0), z(n), Ly(n);
  double lambda = 0.0;
  for (int it = 0; it < 60; ++it) {
    std::vector<double> My(n);
    for (std::size_t c = 0; c < n; ++c) {
      const auto [i, j] = mask.nodes[c];
      My[c] = a[static_cast<std::size_t>(i) * m + j] * y[c];
    }
    z = cg_solve(stiff, My, 1e-12, 40 * m * m);
    double nrm = 0.0;
    for (double v : z) nrm += v * v;
    nrm = std::sqrt(nrm);
    for (std::size_t c = 0; c < n; ++c) y[c] = z[c] / nrm;
    stiff.apply(y, Ly);
    double num = 0.0, den = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const auto [i, j] = mask.nodes[c];
      num += y[c] * Ly[c];
      den += a[static_cast<std::size_t>(i) * m + j] * y[c] * y[c];
    }
    const double next = num / den;
    if (it > 4 && std::abs(next - lambda) < 1e-10 * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

StreamResult stream_function(const std::vector<double>& z_eff, const std::vector<double>& v,
                             const DiscPatch& p) {
  if (z_eff.size() != p.size() || v.size() != p.size())
    throw std::invalid_argument("stream_function: size mismatch");
  const int m = p.m;
  const double h = p.spacing();
  std::vector<double> a(p.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::exp(2.0 * z_eff[i]);

  auto val = [&](const std::vector<double>& f, int i, int j) {
    const int ii = std::clamp(i, 0, m - 1), jj = std::clamp(j, 0, m - 1);
    return f[static_cast<std::size_t>(ii) * m + jj];
  };
  // centered node gradients of v
  auto dvx = [&](int i, int j) { return (val(v, i + 1, j) - val(v, i - 1, j)) / (2 * h); };
  auto dvy = [&](int i, int j) { return (val(v, i, j + 1) - val(v, i, j - 1)) / (2 * h); };

  const DiscMask mask(p, 0.9 * p.radius);
  const std::size_t n = mask.nodes.size();

  // target gradient on staggered edges: F1 = -a v_y on x-edges, F2 = a v_x
  // on y-edges; graph-laplacian normal equations, constants projected out
  std::vector<double> rhs(n, 0.0);
  auto edge_targets = [&](std::size_t c, double& f_right, bool& has_right, double& f_up,
                          bool& has_up) {
    const auto [i, j] = mask.nodes[c];
    has_right = mask.at(i + 1, j) >= 0;
    has_up = mask.at(i, j + 1) >= 0;
    if (has_right) {
      const double ae = 0.5 * (val(a, i, j) + val(a, i + 1, j));
      f_right = -ae * 0.5 * (dvy(i, j) + dvy(i + 1, j));
    }
    if (has_up) {
      const double ae = 0.5 * (val(a, i, j) + val(a, i, j + 1));
      f_up = ae * 0.5 * (dvx(i, j) + dvx(i, j + 1));
    }
  };
  for (std::size_t c = 0; c < n; ++c) {
    const auto [i, j] = mask.nodes[c];
    double fr = 0, fu = 0;
    bool hr = false, hu = false;
    edge_targets(c, fr, hr, fu, hu);
    if (hr) {
      rhs[c] -= fr / h;
      rhs[static_cast<std::size_t>(mask.at(i + 1, j))] += fr / h;
    }
    if (hu) {
      rhs[c] -= fu / h;
      rhs[static_cast<std::size_t>(mask.at(i, j + 1))] += fu / h;
    }
  }

  auto laplace_apply = [&](const std::vector<double>& x, std::vector<double>& out) {
    std::fill(out.begin(), out.end(), 0.0);
    const double inv_h2 = 1.0 / (h * h);
    for (std::size_t c = 0; c < n; ++c) {
      const auto [i, j] = mask.nodes[c];
      const int right = mask.at(i + 1, j), up = mask.at(i, j + 1);
      if (right >= 0) {
        const double flux = (x[static_cast<std::size_t>(right)] - x[c]) * inv_h2;
        out[c] -= flux;
        out[static_cast<std::size_t>(right)] += flux;
      }
      if (up >= 0) {
        const double flux = (x[static_cast<std::size_t>(up)] - x[c]) * inv_h2;
        out[c] -= flux;
        out[static_cast<std::size_t>(up)] += flux;
      }
    }
  };
  auto project = [&](std::vector<double>& x) {
    double mean = 0.0;
    for (double q : x) mean += q;
    mean /= static_cast<double>(n);
    for (double& q : x) q -= mean;
  };

  // CG on the singular consistent system (rhs sums to zero by construction)
  std::vector<double> x(n, 0.0), r = rhs, pp = rhs, Ap(n);
  project(r);
  pp = r;
  double rr = 0.0;
  for (double q : r) rr += q * q;
  const double rr0 = std::max(rr, 1e-300);
  for (int it = 0; it < 40 * m * m && rr > 1e-24 * rr0; ++it) {
    laplace_apply(pp, Ap);
    double pAp = 0.0;
    for (std::size_t i = 0; i < n; ++i) pAp += pp[i] * Ap[i];
    if (pAp <= 0.0) break;
    const double alpha = rr / pAp;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * pp[i];
      r[i] -= alpha * Ap[i];
      rr_new += r[i] * r[i];
    }
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) pp[i] = r[i] + beta * pp[i];
    rr = rr_new;
    if (it % 256 == 255) project(x);
  }

  StreamResult out;
  out.s.assign(p.size(), 0.0);
  const int center = mask.at(m / 2, m / 2);
  if (center < 0) throw std::logic_error("stream_function: center outside mask");
  for (std::size_t c = 0; c < n; ++c) {
    const auto [i, j] = mask.nodes[c];
    out.s[static_cast<std::size_t>(i) * m + j] = x[c] - x[static_cast<std::size_t>(center)];
  }

  // gradient-system residual over the evaluation disc
  CompensatedSum num, den;
  const DiscMask inner(p, p.eval_radius());
  for (std::size_t c = 0; c < inner.nodes.size(); ++c) {
    const auto [i, j] = inner.nodes[c];
    const int me = mask.at(i, j);
    double fr = 0, fu = 0;
    bool hr = false, hu = false;
    edge_targets(static_cast<std::size_t>(me), fr, hr, fu, hu);
    if (hr && inner.at(i + 1, j) >= 0) {
      const double ds = (x[static_cast<std::size_t>(mask.at(i + 1, j))] - x[me]) / h;
      num.add((ds - fr) * (ds - fr));
      den.add(fr * fr);
    }
    if (hu && inner.at(i, j + 1) >= 0) {
      const double ds = (x[static_cast<std::size_t>(mask.at(i, j + 1))] - x[me]) / h;
      num.add((ds - fu) * (ds - fu));
      den.add(fu * fu);
    }
  }
  out.residual = std::sqrt(num.value() / std::max(den.value(), 1e-300));
  if (out.residual > 1e-2)
    throw std::runtime_error("stream_function: input not divergence-free in the weighted sense");
  return out;
}

BeltramiField beltrami_coefficient(const std::vector<double>& z_eff, const std::vector<double>& v,
                                   const DiscPatch& p) {
  if (z_eff.size() != p.size() || v.size() != p.size())
    throw std::invalid_argument("beltrami_coefficient: size mismatch");
  const int m = p.m;
  const double h = p.spacing();
  auto val = [&](const std::vector<double>& f, int i, int j) {
    const int ii = std::clamp(i, 0, m - 1), jj = std::clamp(j, 0, m - 1);
    return f[static_cast<std::size_t>(ii) * m + jj];
  };
  std::vector<double> gx(p.size()), gy(p.size());
  double gmax = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * m + j;
      gx[c] = (val(v, i + 1, j) - val(v, i - 1, j)) / (2 * h);
      gy[c] = (val(v, i, j + 1) - val(v, i, j - 1)) / (2 * h);
      gmax = std::max(gmax, std::hypot(gx[c], gy[c]));
    }
  BeltramiField out;
  out.patch = p;
  out.mu.assign(p.size(), cplx(0, 0));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      const std::size_t c = static_cast<std::size_t>(i) * m + j;
      if (std::hypot(gx[c], gy[c]) <= 1e-10 * gmax) continue;
      const double a = std::exp(2.0 * z_eff[c]);
      const cplx phase = cplx(gx[c], gy[c]) / cplx(gx[c], -gy[c]);
      const cplx mu = ((1.0 - a) / (1.0 + a)) * phase * p.taper(p.node_radius(i, j));
      out.mu[c] = mu;
      out.k_sup = std::max(out.k_sup, std::abs(mu));
    }
  if (out.k_sup >= 1.0) throw std::runtime_error("beltrami_coefficient: distortion bound violated");
  return out;
}

}  // namespace anderlab
